//! Grid sweeps that check the loss bounds point by point, locate extrema of
//! the relative loss, and confirm the optimal multiplicative factor numerically.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, chained_lower, multiplicative_upper};
use crate::error::{Error, Result};
use crate::loss::{partition_range, LossWalker};
use crate::strategy::{validate, Strategy, StrategySpec};

/// Relative slack absorbed by every float comparison.
pub const RELATIVE_SLACK: f64 = 1e-9;
/// Absolute slack used near zero by the relative-loss checks.
pub const ABSOLUTE_SLACK: f64 = 1e-12;

/// Largest λ̂ scanned by [`star_times_nesting`].
pub const NESTING_LAMBDA_CAP: u64 = 1_000_000;

/// Crossing points kept in a nesting report; the count is always exact.
const MAX_RECORDED_CROSSINGS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    /// λ̂ of the failing point; the restart index k for sequence checks.
    pub at: u64,
    pub observed: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub max_relative_loss: f64,
    pub argmax: u64,
}

impl Extremum {
    fn merge(a: Option<Extremum>, b: Option<Extremum>) -> Option<Extremum> {
        match (a, b) {
            (Some(x), Some(y)) => Some(
                if y.max_relative_loss > x.max_relative_loss
                    || (y.max_relative_loss == x.max_relative_loss && y.argmax < x.argmax)
                {
                    y
                } else {
                    x
                },
            ),
            (x, None) => x,
            (None, y) => y,
        }
    }

    fn observe(slot: &mut Option<Extremum>, lambda_hat: u64, rel: f64) {
        *slot = Extremum::merge(
            *slot,
            Some(Extremum {
                max_relative_loss: rel,
                argmax: lambda_hat,
            }),
        );
    }
}

/// Points where the closed-form type's lower bound rises above the chained
/// type's exact loss. Recorded only; these are not violations.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Crossings {
    pub count: u64,
    pub lambda_hats: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub check: &'static str,
    pub descriptor: String,
    pub checks_run: u64,
    pub violations: Vec<Violation>,
    pub extrema: Option<Extremum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossings: Option<Crossings>,
}

impl SweepReport {
    fn new(check: &'static str, descriptor: String) -> Self {
        SweepReport {
            check,
            descriptor,
            checks_run: 0,
            violations: Vec::new(),
            extrema: None,
            crossings: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Combines reports over adjacent ranges; `other` must cover larger λ̂.
    pub fn merge(mut self, other: SweepReport) -> SweepReport {
        self.checks_run += other.checks_run;
        self.violations.extend(other.violations);
        self.extrema = Extremum::merge(self.extrema, other.extrema);
        self.crossings = match (self.crossings.take(), other.crossings) {
            (Some(mut a), Some(b)) => {
                a.count += b.count;
                a.lambda_hats.extend(b.lambda_hats);
                a.lambda_hats.truncate(MAX_RECORDED_CROSSINGS);
                Some(a)
            }
            (a, b) => a.or(b),
        };
        self
    }

    fn check(&mut self, name: &'static str, at: u64, ok: bool, observed: f64, bound: f64) {
        self.checks_run += 1;
        if !ok {
            self.violations.push(Violation {
                check: name,
                at,
                observed,
                bound,
            });
        }
    }
}

fn sandwich_slack(upper: f64) -> f64 {
    RELATIVE_SLACK * upper.abs().max(1.0)
}

fn relative_slack(bound: f64) -> f64 {
    (RELATIVE_SLACK * bound.abs()).max(ABSOLUTE_SLACK)
}

fn check_range(strategy: &Strategy, lo: u64, hi: u64) -> Result<()> {
    if lo < strategy.lambda0() {
        return Err(Error::Domain(format!(
            "sweep must start at or above lambda0 = {}, got {lo}",
            strategy.lambda0()
        )));
    }
    if hi < lo {
        return Err(Error::Domain(format!("empty range: hi = {hi} < lo = {lo}")));
    }
    Ok(())
}

fn run_partitioned<F>(lo: u64, hi: u64, parts: usize, sweep: F) -> Result<SweepReport>
where
    F: Fn(u64, u64) -> Result<SweepReport> + Sync,
{
    let reports = partition_range(lo, hi, 1, parts)
        .into_par_iter()
        .map(|(a, b)| sweep(a, b))
        .collect::<Result<Vec<_>>>()?;
    let mut iter = reports.into_iter();
    let first = iter.next().expect("a nonempty range has at least one part");
    Ok(iter.fold(first, SweepReport::merge))
}

/// Checks `L_low − ε <= L <= L_up + ε` at every λ̂ in `[lo, hi]`,
/// with `ε = 1e-9 · max(1, L_up)`.
pub fn sandwich_sweep(strategy: &Strategy, lo: u64, hi: u64) -> Result<SweepReport> {
    sandwich_sweep_perturbed(strategy, lo, hi, 0.0)
}

/// [`sandwich_sweep`] against `L_up · (1 + perturb_upper)`. A negative
/// perturbation must produce violations; this exists to show the checker can fail.
pub fn sandwich_sweep_perturbed(
    strategy: &Strategy,
    lo: u64,
    hi: u64,
    perturb_upper: f64,
) -> Result<SweepReport> {
    check_range(strategy, lo, hi)?;
    let mut report = SweepReport::new("sandwich", strategy.spec().to_string());
    let mut walker = LossWalker::new(strategy);
    for lambda_hat in lo..=hi {
        let point = walker.at(lambda_hat)?;
        let observed = point.loss as f64;
        let upper = bounds::loss_upper(strategy, lambda_hat)? * (1.0 + perturb_upper);
        let lower = bounds::loss_lower(strategy, lambda_hat)?;
        let eps = sandwich_slack(upper);
        report.check(
            "loss_lower",
            lambda_hat,
            observed >= lower - eps,
            observed,
            lower,
        );
        report.check(
            "loss_upper",
            lambda_hat,
            observed <= upper + eps,
            observed,
            upper,
        );
        Extremum::observe(&mut report.extrema, lambda_hat, point.relative_loss());
    }
    Ok(report)
}

pub fn sandwich_sweep_par(
    strategy: &Strategy,
    lo: u64,
    hi: u64,
    parts: usize,
) -> Result<SweepReport> {
    check_range(strategy, lo, hi)?;
    run_partitioned(lo, hi, parts, |a, b| sandwich_sweep(strategy, a, b))
}

/// Checks the saw-tooth shape on every adjacent pair `(λ̂, λ̂ + 1)` in `[lo, hi]`:
/// the loss drops by exactly one inside a segment, and rises exactly when λ̂
/// is a sequence value λ_k.
pub fn sawtooth_sweep(strategy: &Strategy, lo: u64, hi: u64) -> Result<SweepReport> {
    check_range(strategy, lo, hi)?;
    if hi == lo {
        return Ok(SweepReport::new("sawtooth", strategy.spec().to_string()));
    }
    sawtooth_pairs(strategy, lo, hi - 1)
}

fn sawtooth_pairs(strategy: &Strategy, first: u64, last: u64) -> Result<SweepReport> {
    let mut report = SweepReport::new("sawtooth", strategy.spec().to_string());
    let mut walker = LossWalker::new(strategy);
    let mut prev = walker.at(first)?;
    let mut prev_is_lambda = walker.current_lambda() == first;
    for lambda_hat in first..=last {
        let next = walker.at(lambda_hat + 1)?;
        let observed = next.loss as f64;
        if prev_is_lambda {
            // λ̂ = λ_k: one more restart is needed and the loss jumps up.
            let ok = next.k_hat > prev.k_hat && next.loss > prev.loss;
            report.check(
                "jump_at_sequence_value",
                lambda_hat,
                ok,
                observed,
                prev.loss as f64,
            );
        } else {
            let ok = next.k_hat == prev.k_hat && next.loss + 1 == prev.loss;
            report.check(
                "unit_descent",
                lambda_hat,
                ok,
                observed,
                prev.loss as f64 - 1.0,
            );
        }
        Extremum::observe(&mut report.extrema, lambda_hat, prev.relative_loss());
        prev = next;
        prev_is_lambda = walker.current_lambda() == lambda_hat + 1;
    }
    Extremum::observe(&mut report.extrema, last + 1, prev.relative_loss());
    Ok(report)
}

pub fn sawtooth_sweep_par(
    strategy: &Strategy,
    lo: u64,
    hi: u64,
    parts: usize,
) -> Result<SweepReport> {
    check_range(strategy, lo, hi)?;
    if hi == lo {
        return Ok(SweepReport::new("sawtooth", strategy.spec().to_string()));
    }
    run_partitioned(lo, hi - 1, parts, |a, b| sawtooth_pairs(strategy, a, b))
}

/// Checks `rel_lower − ε <= ℓ` everywhere and `ℓ <= rel_upper + ε` wherever a
/// relative upper bound exists.
pub fn relative_bound_sweep(strategy: &Strategy, lo: u64, hi: u64) -> Result<SweepReport> {
    check_range(strategy, lo, hi)?;
    let mut report = SweepReport::new("relative", strategy.spec().to_string());
    let mut walker = LossWalker::new(strategy);
    for lambda_hat in lo..=hi {
        let rel = walker.at(lambda_hat)?.relative_loss();
        let lower = bounds::rel_lower(strategy, lambda_hat)?;
        report.check(
            "rel_lower",
            lambda_hat,
            rel >= lower - relative_slack(lower),
            rel,
            lower,
        );
        if let Some(upper) = bounds::rel_upper(strategy, lambda_hat)? {
            report.check(
                "rel_upper",
                lambda_hat,
                rel <= upper + relative_slack(upper),
                rel,
                upper,
            );
        }
        Extremum::observe(&mut report.extrema, lambda_hat, rel);
    }
    Ok(report)
}

/// `(max ℓ, argmax λ̂)` over `[lo, hi]`; ties go to the smaller λ̂.
pub fn max_relative_loss(strategy: &Strategy, lo: u64, hi: u64) -> Result<(f64, u64)> {
    check_range(strategy, lo, hi)?;
    let mut walker = LossWalker::new(strategy);
    let mut best: Option<Extremum> = None;
    for lambda_hat in lo..=hi {
        let rel = walker.at(lambda_hat)?.relative_loss();
        Extremum::observe(&mut best, lambda_hat, rel);
    }
    let best = best.expect("range is nonempty");
    Ok((best.max_relative_loss, best.argmax))
}

/// Maximum relative loss on each decade `[10^e, 10^(e+1)]` for
/// `e = first_exp .. last_exp` (exclusive), clipped below at λ_0.
pub fn decade_maxima(
    strategy: &Strategy,
    first_exp: u32,
    last_exp: u32,
) -> Result<Vec<(f64, u64)>> {
    (first_exp..last_exp)
        .map(|e| {
            let lo = 10u64
                .checked_pow(e)
                .ok_or(Error::Overflow)?
                .max(strategy.lambda0());
            let hi = 10u64.checked_pow(e + 1).ok_or(Error::Overflow)?;
            max_relative_loss(strategy, lo, hi)
        })
        .collect()
}

/// Result of a golden-section search over ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoldenMinimum {
    pub rho: f64,
    pub value: f64,
    /// False when the search never moved off a bracket end; `rho` is then that end.
    pub interior: bool,
    pub iterations: u32,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// `ρ + 1/(ρ−1)` as an unevaluated sum `hi + lo` carrying about twice the
/// precision of `f64`. Near the minimum the objective is flat to within
/// `(ρ−2)²`, which plain `f64` cannot resolve below `|ρ−2| ≈ 2e-8`.
fn objective_compensated(rho: f64) -> (f64, f64) {
    let (u, u_err) = two_sum(rho, -1.0);
    let q = 1.0 / u;
    // Exact residual 1 − q·u, then first-order correction for the rounding of u.
    let residual = (-q).mul_add(u, 1.0);
    let q_lo = residual / u - q * u_err / u;
    let (s, e) = two_sum(rho, q);
    two_sum(s, e + q_lo)
}

fn compensated_less(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0) + (a.1 - b.1) < 0.0
}

/// Golden-section minimization of `ρ + 1/(ρ−1)` on `[rho_lo, rho_hi]`.
pub fn minimize_asymptotic_upper(rho_lo: f64, rho_hi: f64, tol: f64) -> Result<GoldenMinimum> {
    if !(rho_lo.is_finite() && rho_hi.is_finite()) || rho_lo <= 1.0 || rho_hi <= rho_lo {
        return Err(Error::invalid(
            "bracket",
            format!("need 1 < rho_lo < rho_hi, got [{rho_lo}, {rho_hi}]"),
        ));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(
            "tol",
            format!("must be a positive real, got {tol}"),
        ));
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (rho_lo, rho_hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective_compensated(c);
    let mut fd = objective_compensated(d);
    let (mut a_moved, mut b_moved) = (false, false);
    let mut iterations = 0u32;

    while b - a > tol && iterations < 500 {
        iterations += 1;
        if compensated_less(fc, fd) {
            b = d;
            b_moved = true;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective_compensated(c);
        } else {
            a = c;
            a_moved = true;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective_compensated(d);
        }
        if !(a < c && c <= d && d < b) {
            // Interval is down to a few ulps.
            break;
        }
    }

    let (rho, interior) = if !b_moved {
        (rho_hi, false)
    } else if !a_moved {
        (rho_lo, false)
    } else {
        (0.5 * (a + b), true)
    };
    let (hi, lo) = objective_compensated(rho);
    Ok(GoldenMinimum {
        rho,
        value: hi + lo,
        interior,
        iterations,
    })
}

/// Compares the chained and closed-form multiplicative types with equal
/// `(λ_0, ρ)`:
///
/// * `λ*_k >= λ×_k` for `k <= k_max`;
/// * the shared upper bound holds for both exact losses;
/// * the chained lower bound holds for both exact losses.
///
/// λ̂ runs over `[λ_0, min(λ×_{k_max}, NESTING_LAMBDA_CAP)]`. Points where the
/// closed-form lower bound exceeds the chained loss are recorded as crossings.
pub fn star_times_nesting(lambda0: u64, rho: f64, k_max: u32) -> Result<SweepReport> {
    let star = validate(&StrategySpec::star(lambda0, rho))?;
    let times = validate(&StrategySpec::times(lambda0, rho))?;
    let mut report = SweepReport::new(
        "nesting",
        format!("star/times(lambda0={lambda0}, rho={rho}, k_max={k_max})"),
    );

    let mut star_lambda = lambda0;
    for k in 0..=k_max {
        if k > 0 {
            star_lambda = star.next_lambda(star_lambda, k)?;
        }
        let times_lambda = times.lambda_at(k)?;
        report.check(
            "sequence_dominance",
            u64::from(k),
            star_lambda >= times_lambda,
            star_lambda as f64,
            times_lambda as f64,
        );
    }

    let hi = times.lambda_at(k_max)?.min(NESTING_LAMBDA_CAP).max(lambda0);
    let l0 = lambda0 as f64;
    let mut star_walk = LossWalker::new(&star);
    let mut times_walk = LossWalker::new(&times);
    let mut crossings = Crossings::default();
    for lambda_hat in lambda0..=hi {
        let lh = lambda_hat as f64;
        let star_loss = star_walk.at(lambda_hat)?.loss as f64;
        let times_loss = times_walk.at(lambda_hat)?.loss as f64;
        let upper = multiplicative_upper(l0, lh, rho);
        let lower = chained_lower(l0, lh, rho);
        let eps = sandwich_slack(upper);
        report.check(
            "shared_upper_star",
            lambda_hat,
            star_loss <= upper + eps,
            star_loss,
            upper,
        );
        report.check(
            "shared_upper_times",
            lambda_hat,
            times_loss <= upper + eps,
            times_loss,
            upper,
        );
        report.check(
            "chained_lower_star",
            lambda_hat,
            star_loss >= lower - eps,
            star_loss,
            lower,
        );
        report.check(
            "chained_lower_times",
            lambda_hat,
            times_loss >= lower - eps,
            times_loss,
            lower,
        );

        let times_lower = (lh - 1.0 - l0) / (rho - 1.0);
        if times_lower > star_loss {
            crossings.count += 1;
            if crossings.lambda_hats.len() < MAX_RECORDED_CROSSINGS {
                crossings.lambda_hats.push(lambda_hat);
            }
        }
    }
    report.crossings = Some(crossings);
    Ok(report)
}

/// Number of checks each sweep performs on a range, for cross-checking reports.
pub fn predicted_checks(check: &str, strategy: &Strategy, lo: u64, hi: u64) -> u64 {
    let n = hi - lo + 1;
    match check {
        "sandwich" => 2 * n,
        "sawtooth" => n - 1,
        "relative" => n * if strategy.rho().is_some() { 2 } else { 1 },
        _ => 0,
    }
}

/// Checks a [`star_times_nesting`] report should contain.
pub fn predicted_nesting_checks(lambda0: u64, rho: f64, k_max: u32) -> Result<u64> {
    let times = validate(&StrategySpec::times(lambda0, rho))?;
    let hi = times.lambda_at(k_max)?.min(NESTING_LAMBDA_CAP).max(lambda0);
    Ok(u64::from(k_max) + 1 + 4 * (hi - lambda0 + 1))
}
