//! Closed-form lower and upper bounds on the loss and relative loss of each
//! strategy type, their λ̂ → ∞ limits, and the optimal restart parameters.
//!
//! All bounds are real-valued and hold for every integer `λ̂ >= λ_0`.
//! `Star` and `Times` share one upper bound; their lower bounds differ.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::strategy::{Strategy, StrategyKind};

/// Bound values at a single λ̂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSet {
    pub lambda_hat: u64,
    pub loss_lower: f64,
    pub loss_upper: f64,
    pub rel_lower: f64,
    /// Absent for the unbounded types (`Plus`, `Pow`).
    pub rel_upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value")]
pub enum AsymptoticBound {
    FiniteUpper(f64),
    FiniteLower(f64),
    /// The relative loss itself diverges: the type is strictly unbounded.
    InfiniteLower,
}

impl AsymptoticBound {
    pub fn value(&self) -> f64 {
        match *self {
            AsymptoticBound::FiniteUpper(v) | AsymptoticBound::FiniteLower(v) => v,
            AsymptoticBound::InfiniteLower => f64::INFINITY,
        }
    }
}

fn check_domain(strategy: &Strategy, lambda_hat: u64) -> Result<()> {
    if lambda_hat < strategy.lambda0() {
        return Err(Error::Domain(format!(
            "bounds need lambda_hat >= lambda0, got {lambda_hat} < {}",
            strategy.lambda0()
        )));
    }
    Ok(())
}

/// `x^(1/α)` as `exp(ln(x)/α)`; `x` is nonnegative on every call site.
fn root(x: f64, alpha: f64) -> f64 {
    (x.ln() / alpha).exp()
}

/// Additive upper bound with a real-valued `ν`.
pub fn additive_upper(lambda0: f64, lambda_hat: f64, nu: f64) -> f64 {
    0.5 * (lambda_hat - lambda0 - 1.0) * ((lambda_hat + lambda0 - 1.0) / nu + 1.0) + lambda0 + nu
        - 1.0
}

fn additive_lower(lambda0: f64, lambda_hat: f64, nu: f64) -> f64 {
    0.5 * (lambda_hat - lambda0) * ((lambda_hat + lambda0) / nu - 1.0)
}

/// Upper bound shared by both multiplicative types, in the closed-form-ceiling
/// arrangement `λ̂(ρ + 1/(ρ−1)) − λ_0/(ρ−1) + ln(λ̂/λ_0)/ln ρ`.
pub fn multiplicative_upper(lambda0: f64, lambda_hat: f64, rho: f64) -> f64 {
    lambda_hat * asymptotic_upper_objective(rho) - lambda0 / (rho - 1.0)
        + (lambda_hat / lambda0).ln() / rho.ln()
}

/// The chained-ceiling arrangement of the same bound,
/// `λ_0ρ + ln(λ̂/λ_0)/ln ρ + (λ̂ − λ_0)(ρ + 1/(ρ−1))`.
/// Algebraically identical to [`multiplicative_upper`].
pub fn chained_upper_expanded(lambda0: f64, lambda_hat: f64, rho: f64) -> f64 {
    lambda0 * rho
        + (lambda_hat / lambda0).ln() / rho.ln()
        + (lambda_hat - lambda0) * asymptotic_upper_objective(rho)
}

fn power_upper(lambda0: f64, lambda_hat: f64, alpha: f64) -> f64 {
    let r = root((lambda_hat - 1.0) / lambda0, alpha);
    let c = lambda0 / (alpha + 1.0);
    c * (r + 2.0).powf(alpha + 1.0) + r - c
}

fn power_lower(lambda0: f64, lambda_hat: f64, alpha: f64) -> f64 {
    if lambda_hat == lambda0 {
        return 0.0;
    }
    let r = root((lambda_hat - 1.0) / lambda0, alpha);
    lambda0 / (alpha + 1.0) * (r - 1.0).powf(alpha + 1.0)
}

/// Upper bound on the loss at λ̂.
pub fn loss_upper(strategy: &Strategy, lambda_hat: u64) -> Result<f64> {
    check_domain(strategy, lambda_hat)?;
    let l0 = strategy.lambda0() as f64;
    let lh = lambda_hat as f64;
    Ok(match strategy.kind() {
        StrategyKind::Plus => additive_upper(l0, lh, strategy.nu().unwrap() as f64),
        StrategyKind::Star | StrategyKind::Times => {
            multiplicative_upper(l0, lh, strategy.rho().unwrap())
        }
        StrategyKind::Pow => power_upper(l0, lh, strategy.alpha().unwrap()),
    })
}

/// Lower bound on the loss at λ̂. May be negative near λ_0 for the multiplicative types.
pub fn loss_lower(strategy: &Strategy, lambda_hat: u64) -> Result<f64> {
    check_domain(strategy, lambda_hat)?;
    let l0 = strategy.lambda0() as f64;
    let lh = lambda_hat as f64;
    Ok(match strategy.kind() {
        StrategyKind::Plus => additive_lower(l0, lh, strategy.nu().unwrap() as f64),
        StrategyKind::Times => {
            let rho = strategy.rho().unwrap();
            (lh - 1.0 - l0) / (rho - 1.0)
        }
        StrategyKind::Star => chained_lower(l0, lh, strategy.rho().unwrap()),
        StrategyKind::Pow => power_lower(l0, lh, strategy.alpha().unwrap()),
    })
}

/// Lower bound for the chained multiplicative type; it also bounds the
/// closed-form type from below.
pub fn chained_lower(lambda0: f64, lambda_hat: f64, rho: f64) -> f64 {
    (lambda_hat - lambda0 - (lambda_hat / lambda0).ln() / rho.ln() - 1.0) / (rho - 1.0)
}

/// Upper bound on the relative loss. `None` for `Plus` and `Pow`, which have none.
pub fn rel_upper(strategy: &Strategy, lambda_hat: u64) -> Result<Option<f64>> {
    check_domain(strategy, lambda_hat)?;
    let Some(rho) = strategy.rho() else {
        return Ok(None);
    };
    let l0 = strategy.lambda0() as f64;
    let lh = lambda_hat as f64;
    Ok(Some(
        asymptotic_upper_objective(rho) - l0 / (lh * (rho - 1.0))
            + (lh / l0).ln() / (lh * rho.ln()),
    ))
}

/// Lower bound on the relative loss.
pub fn rel_lower(strategy: &Strategy, lambda_hat: u64) -> Result<f64> {
    check_domain(strategy, lambda_hat)?;
    let l0 = strategy.lambda0() as f64;
    let lh = lambda_hat as f64;
    Ok(match strategy.kind() {
        StrategyKind::Plus => {
            let nu = strategy.nu().unwrap() as f64;
            (lh + l0) / (2.0 * nu) - (lh + l0) * l0 / (2.0 * lh * nu) - 0.5 + l0 / (2.0 * lh)
        }
        StrategyKind::Star | StrategyKind::Times => loss_lower(strategy, lambda_hat)? / lh,
        StrategyKind::Pow => {
            if lambda_hat == strategy.lambda0() {
                0.0
            } else {
                let alpha = strategy.alpha().unwrap();
                let r = root((lh - 1.0) / l0, alpha);
                let shrink = 1.0 - root(l0 / (lh - 1.0), alpha);
                l0 / (alpha + 1.0) / lh * r.powf(alpha + 1.0) * shrink.powf(alpha + 1.0)
            }
        }
    })
}

pub fn bound_set(strategy: &Strategy, lambda_hat: u64) -> Result<BoundSet> {
    Ok(BoundSet {
        lambda_hat,
        loss_lower: loss_lower(strategy, lambda_hat)?,
        loss_upper: loss_upper(strategy, lambda_hat)?,
        rel_lower: rel_lower(strategy, lambda_hat)?,
        rel_upper: rel_upper(strategy, lambda_hat)?,
    })
}

/// `ρ + 1/(ρ−1)`: the λ̂ → ∞ limit of the multiplicative relative upper bound.
pub fn asymptotic_upper_objective(rho: f64) -> f64 {
    rho + 1.0 / (rho - 1.0)
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho <= 1.0 {
        return Err(Error::invalid(
            "rho",
            format!("must be a finite real > 1, got {rho}"),
        ));
    }
    Ok(())
}

pub fn asymptotic_rel_upper(kind: StrategyKind, rho: f64) -> Result<AsymptoticBound> {
    match kind {
        StrategyKind::Star | StrategyKind::Times => {
            check_rho(rho)?;
            Ok(AsymptoticBound::FiniteUpper(asymptotic_upper_objective(
                rho,
            )))
        }
        StrategyKind::Plus | StrategyKind::Pow => Err(Error::Unsupported(kind)),
    }
}

/// λ̂ → ∞ limit of the relative lower bound; `param` is ν, ρ or α per `kind`.
pub fn asymptotic_rel_lower(kind: StrategyKind, param: f64) -> Result<AsymptoticBound> {
    match kind {
        StrategyKind::Star | StrategyKind::Times => {
            check_rho(param)?;
            Ok(AsymptoticBound::FiniteLower(1.0 / (param - 1.0)))
        }
        StrategyKind::Plus => {
            if !param.is_finite() || param < 1.0 || param.fract() != 0.0 {
                return Err(Error::invalid(
                    "nu",
                    format!("must be a positive integer, got {param}"),
                ));
            }
            Ok(AsymptoticBound::InfiniteLower)
        }
        StrategyKind::Pow => {
            if !param.is_finite() || param < 1.0 {
                return Err(Error::invalid(
                    "alpha",
                    format!("must be a finite real >= 1, got {param}"),
                ));
            }
            Ok(AsymptoticBound::InfiniteLower)
        }
    }
}

/// The real `ν` minimizing the additive upper bound for a known λ̂:
/// `sqrt(((λ̂ − 1)² − λ_0²) / 2)`.
pub fn optimal_nu(lambda0: u64, lambda_hat: u64) -> Result<f64> {
    if lambda0 < 1 {
        return Err(Error::invalid("lambda0", "must be at least 1"));
    }
    let l0 = lambda0 as f64;
    let lh = lambda_hat as f64;
    let radicand = 0.5 * ((lh - 1.0).powi(2) - l0 * l0);
    if radicand <= 0.0 {
        return Err(Error::Domain(format!(
            "no positive optimum: need lambda_hat > lambda0 + 1, got lambda0 = {lambda0}, lambda_hat = {lambda_hat}"
        )));
    }
    Ok(radicand.sqrt())
}

/// `(ρ̂, ρ̂ + 1/(ρ̂−1))` for the multiplicative types: `(2, 3)`.
pub fn optimal_rho() -> (f64, f64) {
    // d/dρ (ρ + 1/(ρ−1)) = 1 − 1/(ρ−1)² vanishes at ρ = 2.
    let rho = 2.0;
    (rho, asymptotic_upper_objective(rho))
}
