//! Runs a restart strategy against a black-box algorithm and accounts for the
//! function evaluations it consumes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::strategy::{Strategy, StrategySpec};

/// Default number of runs before [`run_restarts`] gives up.
pub const DEFAULT_K_CAP: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlackBoxOutcome {
    pub success: bool,
    /// Function evaluations consumed by this run; at least 1.
    pub evaluations: u64,
}

/// One independent run of an algorithm with population size `lambda`.
pub trait BlackBox {
    fn run(&mut self, lambda: u64) -> BlackBoxOutcome;
}

impl<F: FnMut(u64) -> BlackBoxOutcome> BlackBox for F {
    fn run(&mut self, lambda: u64) -> BlackBoxOutcome {
        self(lambda)
    }
}

/// Succeeds iff `λ >= λ̂` and charges `λ · g` evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdOracle {
    pub lambda_hat: u64,
    pub generations: u64,
}

impl BlackBox for ThresholdOracle {
    fn run(&mut self, lambda: u64) -> BlackBoxOutcome {
        BlackBoxOutcome {
            success: lambda >= self.lambda_hat,
            evaluations: lambda.saturating_mul(self.generations),
        }
    }
}

pub fn threshold_blackbox(lambda_hat: u64, generations: u64) -> Result<ThresholdOracle> {
    if lambda_hat < 1 {
        return Err(Error::invalid("lambda_hat", "must be at least 1"));
    }
    if generations < 1 {
        return Err(Error::invalid("g", "must be at least 1"));
    }
    Ok(ThresholdOracle {
        lambda_hat,
        generations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Run {
    pub k: u32,
    pub lambda: u64,
    pub evaluations: u64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartTrace {
    pub spec: StrategySpec,
    pub runs: Vec<Run>,
    pub total_evaluations: u64,
    pub succeeded: bool,
}

/// Invokes `blackbox` at λ_0, λ_1, … until a run succeeds or `k_cap` runs
/// have failed. A failed λ is never retried.
pub fn run_restarts<B: BlackBox + ?Sized>(
    strategy: &Strategy,
    blackbox: &mut B,
    k_cap: u32,
) -> Result<RestartTrace> {
    if k_cap < 1 {
        return Err(Error::invalid("k_cap", "must be at least 1"));
    }
    let mut trace = RestartTrace {
        spec: *strategy.spec(),
        runs: Vec::new(),
        total_evaluations: 0,
        succeeded: false,
    };
    for step in strategy.lambdas().take(k_cap as usize) {
        let (k, lambda) = step?;
        let outcome = blackbox.run(lambda);
        if outcome.evaluations < 1 {
            return Err(Error::InvalidOutcome(outcome.evaluations));
        }
        trace.total_evaluations = trace
            .total_evaluations
            .checked_add(outcome.evaluations)
            .ok_or(Error::Overflow)?;
        trace.runs.push(Run {
            k,
            lambda,
            evaluations: outcome.evaluations,
            success: outcome.success,
        });
        if outcome.success {
            trace.succeeded = true;
            return Ok(trace);
        }
    }
    Err(Error::CapExceeded {
        cap: k_cap,
        trace: Box::new(trace),
    })
}
