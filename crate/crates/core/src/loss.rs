//! Exact loss of a restart strategy against a known optimal λ̂.
//!
//! The reduced loss is `L(λ̂) = Σ_{k=0}^{k̂} λ_k − λ̂`, i.e. the λ spent on all
//! runs up to the first successful one minus the cost of running at λ̂ directly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::strategy::{Lambdas, Strategy, StrategySpec, LAMBDA_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LossPoint {
    pub lambda_hat: u64,
    pub k_hat: u32,
    /// Reduced loss, in units of λ.
    pub loss: u64,
}

impl LossPoint {
    /// `ℓ = L / λ̂`.
    pub fn relative_loss(&self) -> f64 {
        self.loss as f64 / self.lambda_hat as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossCurve {
    pub spec: StrategySpec,
    pub points: Vec<LossPoint>,
}

fn check_domain(strategy: &Strategy, lambda_hat: u64) -> Result<()> {
    if lambda_hat < strategy.lambda0() {
        return Err(Error::Domain(format!(
            "lambda_hat = {lambda_hat} is below lambda0 = {}",
            strategy.lambda0()
        )));
    }
    Ok(())
}

fn accumulate(total: u64, lambda: u64) -> Result<u64> {
    total
        .checked_add(lambda)
        .filter(|&v| v <= LAMBDA_CAP)
        .ok_or(Error::Overflow)
}

/// Loss at a single λ̂, computed by running the restart loop step by step.
pub fn loss(strategy: &Strategy, lambda_hat: u64) -> Result<LossPoint> {
    check_domain(strategy, lambda_hat)?;
    let mut lambda = strategy.lambda0();
    let mut evaluations = lambda;
    let mut k = 0u32;
    while lambda < lambda_hat {
        k = k.checked_add(1).ok_or(Error::Overflow)?;
        lambda = strategy.next_lambda(lambda, k)?;
        evaluations = accumulate(evaluations, lambda)?;
    }
    Ok(LossPoint {
        lambda_hat,
        k_hat: k,
        loss: evaluations - lambda_hat,
    })
}

/// `ΔF_E = g · L` when every run uses the same number of generations `g`.
pub fn full_loss(strategy: &Strategy, lambda_hat: u64, generations: u64) -> Result<u64> {
    if generations < 1 {
        return Err(Error::invalid("g", "must be at least 1"));
    }
    let point = loss(strategy, lambda_hat)?;
    point
        .loss
        .checked_mul(generations)
        .filter(|&v| v <= LAMBDA_CAP)
        .ok_or(Error::Overflow)
}

/// Walks a strategy's sequence once while λ̂ moves upward, producing the
/// same points as [`loss`] without restarting the sum at every λ̂.
pub struct LossWalker<'a> {
    strategy: &'a Strategy,
    lambdas: Lambdas<'a>,
    k: u32,
    lambda: u64,
    sum: u64,
    last: Option<u64>,
}

impl<'a> LossWalker<'a> {
    pub fn new(strategy: &'a Strategy) -> Self {
        let mut lambdas = strategy.lambdas();
        // λ_0 never fails.
        let _ = lambdas.next();
        LossWalker {
            strategy,
            lambdas,
            k: 0,
            lambda: strategy.lambda0(),
            sum: strategy.lambda0(),
            last: None,
        }
    }

    /// Loss at `lambda_hat`. Successive calls must use nondecreasing λ̂.
    pub fn at(&mut self, lambda_hat: u64) -> Result<LossPoint> {
        check_domain(self.strategy, lambda_hat)?;
        if let Some(last) = self.last {
            if lambda_hat < last {
                return Err(Error::Domain(format!(
                    "walker moved backwards from {last} to {lambda_hat}"
                )));
            }
        }
        self.last = Some(lambda_hat);
        while self.lambda < lambda_hat {
            let (k, lambda) = self
                .lambdas
                .next()
                .expect("lambda iterator ends only after an error")?;
            self.k = k;
            self.lambda = lambda;
            self.sum = accumulate(self.sum, lambda)?;
        }
        Ok(LossPoint {
            lambda_hat,
            k_hat: self.k,
            loss: self.sum - lambda_hat,
        })
    }

    /// λ_k̂ for the most recent query.
    pub fn current_lambda(&self) -> u64 {
        self.lambda
    }
}

fn check_range(strategy: &Strategy, lo: u64, hi: u64, stride: u64) -> Result<()> {
    check_domain(strategy, lo)?;
    if hi < lo {
        return Err(Error::Domain(format!("empty range: hi = {hi} < lo = {lo}")));
    }
    if stride < 1 {
        return Err(Error::invalid("stride", "must be at least 1"));
    }
    Ok(())
}

/// Inclusive sample points `lo, lo + stride, …, <= hi`.
pub fn sample_points(lo: u64, hi: u64, stride: u64) -> impl Iterator<Item = u64> {
    let count = if hi < lo || stride == 0 {
        0
    } else {
        (hi - lo) / stride + 1
    };
    (0..count).map(move |i| lo + i * stride)
}

/// Loss at every sampled λ̂ in `[lo, hi]`, in one pass over the sequence.
pub fn loss_curve(strategy: &Strategy, lo: u64, hi: u64, stride: u64) -> Result<LossCurve> {
    check_range(strategy, lo, hi, stride)?;
    let mut walker = LossWalker::new(strategy);
    let points = sample_points(lo, hi, stride)
        .map(|lambda_hat| walker.at(lambda_hat))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossCurve {
        spec: *strategy.spec(),
        points,
    })
}

/// Splits the sampled points of `[lo, hi]` into at most `parts` contiguous
/// subranges, each starting on a sample point.
pub fn partition_range(lo: u64, hi: u64, stride: u64, parts: usize) -> Vec<(u64, u64)> {
    if hi < lo || stride == 0 {
        return Vec::new();
    }
    let count = (hi - lo) / stride + 1;
    let parts = (parts.max(1) as u64).min(count);
    let per = count / parts;
    let extra = count % parts;
    let mut out = Vec::with_capacity(parts as usize);
    let mut start = 0u64;
    for p in 0..parts {
        let len = per + u64::from(p < extra);
        let first = lo + start * stride;
        let last = lo + (start + len - 1) * stride;
        out.push((first, last));
        start += len;
    }
    out
}

/// [`loss_curve`] evaluated over `parts` subranges on the current rayon pool.
/// The result is identical to the sequential curve.
pub fn loss_curve_par(
    strategy: &Strategy,
    lo: u64,
    hi: u64,
    stride: u64,
    parts: usize,
) -> Result<LossCurve> {
    check_range(strategy, lo, hi, stride)?;
    let chunks = partition_range(lo, hi, stride, parts)
        .into_par_iter()
        .map(|(a, b)| loss_curve(strategy, a, b, stride).map(|c| c.points))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossCurve {
        spec: *strategy.spec(),
        points: chunks.into_iter().flatten().collect(),
    })
}
