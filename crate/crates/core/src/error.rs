use crate::driver::RestartTrace;
use crate::strategy::StrategyKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("value exceeds the 2^62 magnitude cap")]
    Overflow,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} has no finite asymptotic upper bound")]
    Unsupported(StrategyKind),

    /// No successful run within `cap` invocations. Carries the runs that did happen.
    #[error("no success within {cap} runs")]
    CapExceeded { cap: u32, trace: Box<RestartTrace> },

    #[error("black box reported {0} evaluations; every run must consume at least one")]
    InvalidOutcome(u64),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
