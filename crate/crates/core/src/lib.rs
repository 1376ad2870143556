//! Restart strategies for population-based optimizers: the λ sequences, the
//! exact loss against a known optimal population size λ̂, closed-form bounds on
//! that loss, verification sweeps, and a driver for black-box algorithms.

pub mod bounds;
pub mod cli;
pub mod driver;
pub mod error;
pub mod loss;
pub mod strategy;
pub mod sweep;

pub use bounds::{
    bound_set, loss_lower, loss_upper, optimal_nu, optimal_rho, rel_lower, rel_upper, BoundSet,
};
pub use driver::{
    run_restarts, threshold_blackbox, BlackBox, BlackBoxOutcome, RestartTrace, ThresholdOracle,
};
pub use error::{Error, Result};
pub use loss::{full_loss, loss, loss_curve, LossCurve, LossPoint};
pub use strategy::{validate, Strategy, StrategyKind, StrategySpec, LAMBDA_CAP};
pub use sweep::{minimize_asymptotic_upper, star_times_nesting, SweepReport};
