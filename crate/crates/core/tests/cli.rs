use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_restartlab"))
        .args(args)
        .env_remove("RESTARTLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_lines(out: &Output) -> usize {
    String::from_utf8_lossy(&out.stderr).lines().count()
}

fn csv_rows(out: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    (header, rows)
}

#[test]
fn loss_csv_examples() {
    let out = run(&[
        "loss",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "1",
        "--lo",
        "2",
        "--hi",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["lambda_hat", "k_hat", "loss", "rel_loss"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][2], "9");

    let out = run(&[
        "loss",
        "--type",
        "star",
        "--lambda0",
        "2",
        "--rho",
        "2",
        "--lo",
        "2",
        "--hi",
        "2",
    ]);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "0");

    let out = run(&[
        "loss",
        "--type",
        "pow",
        "--lambda0",
        "2",
        "--alpha",
        "2",
        "--lo",
        "10",
        "--hi",
        "10",
    ]);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows[0][2], "18");
}

#[test]
fn csv_and_json_encode_identical_values() {
    for spec in [
        ["--type", "plus", "--lambda0", "3", "--nu", "4"],
        ["--type", "star", "--lambda0", "2", "--rho", "1.3"],
        ["--type", "times", "--lambda0", "10", "--rho", "2.5"],
        ["--type", "pow", "--lambda0", "1", "--alpha", "1.5"],
    ] {
        let base: Vec<&str> = ["loss"]
            .into_iter()
            .chain(spec)
            .chain(["--lo", "10", "--hi", "400", "--stride", "7", "--bounds"])
            .collect();
        let csv = run(&[base.as_slice(), &["--format", "csv"]].concat());
        let js = run(&[base.as_slice(), &["--format", "json"]].concat());
        assert_eq!(csv.status.code(), Some(0));
        assert_eq!(js.status.code(), Some(0));
        let (header, rows) = csv_rows(&csv);
        let doc = json(&js);
        assert_eq!(doc["schema_version"], 1);
        let records = doc["rows"].as_array().unwrap();
        assert_eq!(records.len(), rows.len());
        for (row, record) in rows.iter().zip(records) {
            for (name, cell) in header.iter().zip(row) {
                let v = &record[name.as_str()];
                if let Some(i) = v.as_u64() {
                    assert_eq!(cell.parse::<u64>().unwrap(), i, "{name}");
                } else {
                    let parsed: f64 = cell.parse().unwrap();
                    assert_eq!(parsed.to_bits(), v.as_f64().unwrap().to_bits(), "{name}");
                }
            }
        }
    }
}

#[test]
fn output_is_deterministic_and_thread_count_independent() {
    let args = [
        "loss",
        "--type",
        "times",
        "--lambda0",
        "2",
        "--rho",
        "1.7",
        "--lo",
        "2",
        "--hi",
        "20000",
        "--bounds",
    ];
    let a = run(&args);
    let b = run(&args);
    let c = Command::new(env!("CARGO_BIN_EXE_restartlab"))
        .args(args)
        .env("RESTARTLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let (_, rows) = csv_rows(&a);
    let lh: Vec<u64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(lh.windows(2).all(|w| w[1] == w[0] + 1));
}

#[test]
fn bad_thread_setting_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_restartlab"))
        .args(["optimize", "--target", "rho"])
        .env("RESTARTLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let ok = run(&[
        "verify",
        "--type",
        "star",
        "--lambda0",
        "2",
        "--rho",
        "2",
        "--lo",
        "2",
        "--hi",
        "1000",
        "--check",
        "sandwich",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let doc = json(&ok);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["reports"][0]["checks_run"], 2 * 999);

    let ok = run(&[
        "verify",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "5",
        "--lo",
        "2",
        "--hi",
        "200",
        "--check",
        "sawtooth",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["reports"][0]["checks_run"], 198);

    let all = run(&[
        "verify",
        "--type",
        "times",
        "--lambda0",
        "2",
        "--rho",
        "3",
        "--hi",
        "500",
        "--k-max",
        "8",
    ]);
    assert_eq!(all.status.code(), Some(0));
    let doc = json(&all);
    let checks: Vec<&str> = doc["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["check"].as_str().unwrap())
        .collect();
    assert_eq!(checks, ["sandwich", "sawtooth", "relative", "nesting"]);

    let nesting_on_plus = run(&[
        "verify",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "5",
        "--check",
        "nesting",
    ]);
    assert_eq!(nesting_on_plus.status.code(), Some(2));
    let missing_hi = run(&[
        "verify",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "5",
        "--check",
        "sandwich",
    ]);
    assert_eq!(missing_hi.status.code(), Some(2));
}

#[cfg(debug_assertions)]
#[test]
fn perturbed_bound_is_caught() {
    let out = run(&[
        "verify",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "1",
        "--hi",
        "1000",
        "--check",
        "sandwich",
        "--perturb-upper",
        "-1e-3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    assert_eq!(doc["passed"], false);
    assert!(!doc["reports"][0]["violations"]
        .as_array()
        .unwrap()
        .is_empty());

    let out = run(&[
        "verify",
        "--type",
        "star",
        "--lambda0",
        "2",
        "--rho",
        "2",
        "--hi",
        "10000",
        "--check",
        "sandwich",
        "--perturb-upper",
        "-1e-3",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_examples() {
    let out = run(&["optimize", "--target", "rho"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["optimum"], 2.0);
    assert_eq!(doc["objective_value"], 3.0);
    assert!((doc["numeric"]["rho"].as_f64().unwrap() - 2.0).abs() <= 1e-8);

    let out = run(&[
        "optimize",
        "--target",
        "nu",
        "--lambda0",
        "2",
        "--lambda-hat",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let nu = json(&out)["optimum"].as_f64().unwrap();
    assert!((69.9..=70.1).contains(&nu));

    let out = run(&[
        "optimize",
        "--target",
        "nu",
        "--lambda0",
        "3",
        "--lambda-hat",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_lines(&out), 1);

    let out = run(&[
        "optimize",
        "--target",
        "rho",
        "--bracket-lo",
        "1.9",
        "--bracket-hi",
        "1.95",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["numeric"]["interior"], false);
}

#[test]
fn drive_examples() {
    let out = run(&[
        "drive",
        "--type",
        "star",
        "--lambda0",
        "2",
        "--rho",
        "2",
        "--oracle-lambda-hat",
        "5",
        "--gens",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["total_evaluations"], 14);
    assert_eq!(doc["predicted_total"], 14);

    let out = run(&[
        "drive",
        "--type",
        "pow",
        "--lambda0",
        "6",
        "--alpha",
        "2",
        "--oracle-lambda-hat",
        "6",
        "--gens",
        "9",
    ]);
    assert_eq!(json(&out)["total_evaluations"], 54);

    let out = run(&[
        "drive",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "1",
        "--oracle-lambda-hat",
        "1000000",
        "--gens",
        "1",
        "--k-cap",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out);
    assert_eq!(doc["succeeded"], false);
    assert_eq!(doc["runs"].as_array().unwrap().len(), 10);
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    for args in [
        vec!["loss", "--type", "plus"],
        vec![
            "loss",
            "--type",
            "bogus",
            "--lambda0",
            "1",
            "--lo",
            "1",
            "--hi",
            "2",
        ],
        vec![
            "loss",
            "--type",
            "plus",
            "--lambda0",
            "2",
            "--rho",
            "2",
            "--lo",
            "2",
            "--hi",
            "3",
        ],
        vec![
            "loss",
            "--type",
            "star",
            "--lambda0",
            "2",
            "--rho",
            "0.5",
            "--lo",
            "2",
            "--hi",
            "3",
        ],
        vec![
            "loss",
            "--type",
            "plus",
            "--lambda0",
            "5",
            "--nu",
            "1",
            "--lo",
            "2",
            "--hi",
            "3",
        ],
        vec![
            "loss",
            "--type",
            "plus",
            "--lambda0",
            "2",
            "--nu",
            "1",
            "--lo",
            "2",
            "--hi",
            "3",
            "--stride",
            "0",
        ],
        vec!["frobnicate"],
        vec![],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(
            stderr_lines(&out),
            1,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let v = run(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("restartlab "));
}

#[test]
fn out_writes_file_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let path_str = path.to_str().unwrap();
    let direct = run(&[
        "loss",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "3",
        "--lo",
        "2",
        "--hi",
        "50",
    ]);
    let out = run(&[
        "loss",
        "--type",
        "plus",
        "--lambda0",
        "2",
        "--nu",
        "3",
        "--lo",
        "2",
        "--hi",
        "50",
        "--out",
        path_str,
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 1);

    let missing = dir.path().join("no/such/dir/out.csv");
    let out = run(&[
        "optimize",
        "--target",
        "rho",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
