//! Command-line front end. Data goes to stdout (or `--out`), diagnostics to
//! stderr as a single line.
//!
//! Exit codes: 0 success, 1 check failure / cap exceeded / I/O error,
//! 2 usage or domain error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{self, additive_upper, optimal_nu, optimal_rho};
use crate::driver::{run_restarts, threshold_blackbox, DEFAULT_K_CAP};
use crate::error::Error;
use crate::loss::{loss, loss_curve_par};
use crate::strategy::{validate, Strategy, StrategyKind, StrategySpec};
use crate::sweep::{self, minimize_asymptotic_upper, SweepReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "RESTARTLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "restartlab",
    version,
    about = "Loss curves, bounds and verification for restart strategies"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact loss per λ̂, optionally with bound columns.
    Loss(LossArgs),
    /// Sweep a λ̂ range and check the loss bounds; exit 1 on any violation.
    Verify(VerifyArgs),
    /// Optimal additive step ν or multiplicative factor ρ.
    Optimize(OptimizeArgs),
    /// Run a strategy against the threshold oracle and account evaluations.
    Drive(DriveArgs),
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Strategy type: plus, star, times or pow.
    #[arg(long = "type", value_name = "TYPE")]
    kind: StrategyKind,
    #[arg(long)]
    lambda0: u64,
    /// Additive step (plus).
    #[arg(long)]
    nu: Option<u64>,
    /// Multiplicative factor (star, times).
    #[arg(long)]
    rho: Option<f64>,
    /// Exponent (pow).
    #[arg(long)]
    alpha: Option<f64>,
}

impl SpecArgs {
    fn strategy(&self) -> Result<Strategy, Error> {
        validate(&StrategySpec {
            kind: self.kind,
            lambda0: self.lambda0,
            nu: self.nu,
            rho: self.rho,
            alpha: self.alpha,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct LossArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    lo: u64,
    #[arg(long)]
    hi: u64,
    #[arg(long, default_value_t = 1)]
    stride: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Add loss_lower and loss_upper columns.
    #[arg(long)]
    bounds: bool,
    /// Write to this file (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Sandwich,
    Sawtooth,
    Relative,
    Nesting,
    All,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// First λ̂; defaults to lambda0.
    #[arg(long)]
    lo: Option<u64>,
    /// Last λ̂; required by every check except nesting.
    #[arg(long)]
    hi: Option<u64>,
    #[arg(long, value_enum, default_value_t = Check::All)]
    check: Check,
    /// Sequence length compared by the nesting check.
    #[arg(long, default_value_t = 40)]
    k_max: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scale the upper bound by (1 + X) before checking. Debug builds only.
    #[cfg(debug_assertions)]
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    perturb_upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Nu,
    Rho,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[arg(long, value_enum)]
    target: Target,
    #[arg(long)]
    lambda0: Option<u64>,
    #[arg(long)]
    lambda_hat: Option<u64>,
    /// Bracket width at which the golden-section search stops.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1.01)]
    bracket_lo: f64,
    #[arg(long, default_value_t = 10.0)]
    bracket_hi: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DriveArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    oracle_lambda_hat: u64,
    #[arg(long)]
    gens: u64,
    #[arg(long, default_value_t = DEFAULT_K_CAP)]
    k_cap: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure of a command, mapped to an exit code.
enum Failure {
    Usage(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } | Error::InvalidOutcome(_) => Failure::Failed(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

/// Output of a successful command; `failed` selects exit code 1.
struct Output {
    body: String,
    failed: Option<String>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = writeln!(stderr, "{}", single_line(&rendered));
                    EXIT_USAGE
                }
            };
        }
    };

    let result = configured_pool().and_then(|pool| pool.install(|| execute(&cli.command)));
    match result {
        Ok((output, out_path)) => {
            if let Err(e) = emit(&output.body, out_path.as_deref(), stdout) {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_FAILURE;
            }
            match output.failed {
                Some(msg) => {
                    let _ = writeln!(stderr, "error: {msg}");
                    EXIT_FAILURE
                }
                None => EXIT_OK,
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Failed(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

/// Joins clap's multi-line message up to its usage block.
fn single_line(rendered: &str) -> String {
    rendered
        .lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn configured_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(raw) = std::env::var_os(THREADS_ENV) {
        let threads = raw
            .to_str()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Failure::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {raw:?}"
                ))
            })?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Failure::Failed(format!("cannot start worker threads: {e}")))
}

fn parts() -> usize {
    rayon::current_num_threads() * 4
}

fn execute(command: &Command) -> Result<(Output, Option<PathBuf>), Failure> {
    match command {
        Command::Loss(a) => cmd_loss(a).map(|o| (o, a.out.clone())),
        Command::Verify(a) => cmd_verify(a).map(|o| (o, a.out.clone())),
        Command::Optimize(a) => cmd_optimize(a).map(|o| (o, a.out.clone())),
        Command::Drive(a) => cmd_drive(a).map(|o| (o, a.out.clone())),
    }
}

/// Writes `body` to `path` through a temporary file in the same directory,
/// or to `stdout` when no path is given.
fn emit(body: &str, path: Option<&Path>, stdout: &mut dyn Write) -> std::io::Result<()> {
    let Some(path) = path else {
        stdout.write_all(body.as_bytes())?;
        return stdout.flush();
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct LossRow {
    lambda_hat: u64,
    k_hat: u32,
    loss: u64,
    rel_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_upper: Option<f64>,
}

fn cmd_loss(a: &LossArgs) -> Result<Output, Failure> {
    let strategy = a.spec.strategy()?;
    let curve = loss_curve_par(&strategy, a.lo, a.hi, a.stride, parts())?;
    let rows = curve
        .points
        .iter()
        .map(|p| {
            let (loss_lower, loss_upper) = if a.bounds {
                (
                    Some(bounds::loss_lower(&strategy, p.lambda_hat)?),
                    Some(bounds::loss_upper(&strategy, p.lambda_hat)?),
                )
            } else {
                (None, None)
            };
            Ok(LossRow {
                lambda_hat: p.lambda_hat,
                k_hat: p.k_hat,
                loss: p.loss,
                rel_loss: p.relative_loss(),
                loss_lower,
                loss_upper,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let body = match a.format {
        Format::Csv => {
            let mut s = String::from("lambda_hat,k_hat,loss,rel_loss");
            if a.bounds {
                s.push_str(",loss_lower,loss_upper");
            }
            s.push('\n');
            for r in &rows {
                let _ = write!(s, "{},{},{},{}", r.lambda_hat, r.k_hat, r.loss, r.rel_loss);
                if let (Some(lo), Some(up)) = (r.loss_lower, r.loss_upper) {
                    let _ = write!(s, ",{lo},{up}");
                }
                s.push('\n');
            }
            s
        }
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "loss",
            "spec": strategy.spec(),
            "rows": rows,
        })),
    };
    Ok(Output { body, failed: None })
}

fn cmd_verify(a: &VerifyArgs) -> Result<Output, Failure> {
    let strategy = a.spec.strategy()?;
    #[cfg(debug_assertions)]
    let perturb = a.perturb_upper.unwrap_or(0.0);
    #[cfg(not(debug_assertions))]
    let perturb = 0.0;

    let multiplicative = matches!(strategy.kind(), StrategyKind::Star | StrategyKind::Times);
    let checks: Vec<Check> = match a.check {
        Check::All => {
            let mut v = vec![Check::Sandwich, Check::Sawtooth, Check::Relative];
            if multiplicative {
                v.push(Check::Nesting);
            }
            v
        }
        Check::Nesting if !multiplicative => {
            return Err(Failure::Usage(format!(
                "the nesting check needs --type star or times, got {}",
                strategy.kind()
            )))
        }
        c => vec![c],
    };

    let lo = a.lo.unwrap_or(strategy.lambda0());
    let needs_range = checks.iter().any(|&c| c != Check::Nesting);
    let hi = match a.hi {
        Some(hi) => Some(hi),
        None if needs_range => return Err(Failure::Usage("--hi is required by this check".into())),
        None => None,
    };

    let mut reports: Vec<SweepReport> = Vec::new();
    for check in checks {
        let report = match (check, hi) {
            (Check::Sandwich, Some(hi)) if perturb != 0.0 => {
                sweep::sandwich_sweep_perturbed(&strategy, lo, hi, perturb)?
            }
            (Check::Sandwich, Some(hi)) => sweep::sandwich_sweep_par(&strategy, lo, hi, parts())?,
            (Check::Sawtooth, Some(hi)) => sweep::sawtooth_sweep_par(&strategy, lo, hi, parts())?,
            (Check::Relative, Some(hi)) => sweep::relative_bound_sweep(&strategy, lo, hi)?,
            (Check::Nesting, _) => {
                let rho = strategy.rho().expect("multiplicative strategies carry rho");
                sweep::star_times_nesting(strategy.lambda0(), rho, a.k_max)?
            }
            _ => unreachable!("range presence checked above"),
        };
        reports.push(report);
    }

    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    let passed = violations == 0;
    let body = to_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "spec": strategy.spec(),
        "lo": lo,
        "hi": hi,
        "passed": passed,
        "reports": reports,
    }));
    Ok(Output {
        body,
        failed: (!passed).then(|| format!("{violations} violation(s) found")),
    })
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<Output, Failure> {
    let body = match a.target {
        Target::Nu => {
            let (Some(lambda0), Some(lambda_hat)) = (a.lambda0, a.lambda_hat) else {
                return Err(Failure::Usage(
                    "--target nu needs --lambda0 and --lambda-hat".into(),
                ));
            };
            let nu = optimal_nu(lambda0, lambda_hat)?;
            json!({
                "schema_version": SCHEMA_VERSION,
                "command": "optimize",
                "target": "nu",
                "lambda0": lambda0,
                "lambda_hat": lambda_hat,
                "optimum": nu,
                "objective_value": additive_upper(lambda0 as f64, lambda_hat as f64, nu),
            })
        }
        Target::Rho => {
            let (rho, value) = optimal_rho();
            let numeric = minimize_asymptotic_upper(a.bracket_lo, a.bracket_hi, a.tol)?;
            json!({
                "schema_version": SCHEMA_VERSION,
                "command": "optimize",
                "target": "rho",
                "optimum": rho,
                "objective_value": value,
                "numeric": numeric,
            })
        }
    };
    Ok(Output {
        body: to_json(&body),
        failed: None,
    })
}

fn cmd_drive(a: &DriveArgs) -> Result<Output, Failure> {
    let strategy = a.spec.strategy()?;
    let mut oracle = threshold_blackbox(a.oracle_lambda_hat, a.gens)?;
    let (trace, failed) = match run_restarts(&strategy, &mut oracle, a.k_cap) {
        Ok(trace) => (trace, None),
        Err(Error::CapExceeded { cap, trace }) => {
            (*trace, Some(format!("no success within {cap} runs")))
        }
        Err(e) => return Err(e.into()),
    };
    // g·(L + λ̂), defined when the loss itself is.
    let predicted = if a.oracle_lambda_hat >= strategy.lambda0() {
        loss(&strategy, a.oracle_lambda_hat)
            .ok()
            .and_then(|p| p.loss.checked_add(p.lambda_hat))
            .and_then(|v| v.checked_mul(a.gens))
    } else {
        None
    };
    let body = to_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "command": "drive",
        "oracle": { "lambda_hat": a.oracle_lambda_hat, "g": a.gens },
        "k_cap": a.k_cap,
        "spec": trace.spec,
        "runs": trace.runs,
        "total_evaluations": trace.total_evaluations,
        "succeeded": trace.succeeded,
        "predicted_total": predicted,
    }));
    Ok(Output { body, failed })
}
