//! Reference implementations written directly from the definitions, kept
//! separate from the library so tests compare two independent computations.
#![allow(dead_code)]

use restartlab::{StrategyKind, StrategySpec};

/// Ceiling that treats values within 1e-9 (relative, at most 1e-3 absolute)
/// of an integer as that integer.
pub fn ceil_snapped(x: f64) -> u64 {
    let nearest = x.round();
    let window = (1e-9 * x.abs().max(1.0)).min(1e-3);
    if (x - nearest).abs() <= window {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}

/// λ_0, λ_1, … while the values stay at or below `limit`, plus the first value above it.
pub fn sequence(spec: &StrategySpec, limit: u64) -> Vec<u64> {
    let l0 = spec.lambda0;
    let mut out = vec![l0];
    let mut k = 0u32;
    while *out.last().unwrap() < limit {
        k += 1;
        let prev = *out.last().unwrap();
        let next = match spec.kind {
            StrategyKind::Plus => l0 + u64::from(k) * spec.nu.unwrap(),
            StrategyKind::Star => ceil_snapped(prev as f64 * spec.rho.unwrap()),
            StrategyKind::Times => ceil_snapped(l0 as f64 * spec.rho.unwrap().powi(k as i32)),
            StrategyKind::Pow => {
                ceil_snapped(l0 as f64 * (f64::from(k) + 1.0).powf(spec.alpha.unwrap()))
            }
        };
        out.push(next);
    }
    out
}

/// Restart loop: run at λ_0, λ_1, … until λ_k >= λ̂; return `(k̂, Σλ_k − λ̂)`.
pub fn loss(spec: &StrategySpec, lambda_hat: u64) -> (u32, u64) {
    let seq = sequence(spec, lambda_hat);
    let k_hat = seq.iter().position(|&l| l >= lambda_hat).unwrap();
    let spent: u64 = seq[..=k_hat].iter().sum();
    (k_hat as u32, spent - lambda_hat)
}

/// ρ + 1/(ρ−1) − λ_0/(λ̂(ρ−1)) + ln(λ̂/λ_0)/(λ̂ ln ρ).
pub fn multiplicative_rel_upper(lambda0: f64, lambda_hat: f64, rho: f64) -> f64 {
    rho + 1.0 / (rho - 1.0) - lambda0 / (lambda_hat * (rho - 1.0))
        + (lambda_hat / lambda0).ln() / (lambda_hat * rho.ln())
}

/// Every strategy of the reference parameter grid.
pub fn grid() -> Vec<StrategySpec> {
    let mut out = Vec::new();
    for l0 in [1u64, 2, 10] {
        for nu in [1u64, 2, 5, 20] {
            out.push(StrategySpec::plus(l0, nu));
        }
        for rho in [1.1, 1.5, 2.0, 3.0, 5.0] {
            out.push(StrategySpec::star(l0, rho));
            out.push(StrategySpec::times(l0, rho));
        }
        for alpha in [1.0, 1.5, 2.0, 3.0] {
            out.push(StrategySpec::pow(l0, alpha));
        }
    }
    out
}
