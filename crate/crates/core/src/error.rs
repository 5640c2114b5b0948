use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("capacity exceeded: {what} is {got}, limit is {limit}")]
    Capacity {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// The distortion weight is neither non-decreasing nor non-negative, so
    /// the worst-case quantile characterisation does not apply.
    #[error(
        "unsupported distortion weight: worst-case solve requires gamma non-decreasing (case i) \
         or non-negative (case ii)"
    )]
    UnsupportedDistortion,

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("no Lagrange multiplier found: {0}")]
    NoSolution(String),

    #[error("no witness exists: {0}")]
    NoWitness(String),

    #[error("infeasible target: residual norm {norm} exceeds budget {budget}")]
    InfeasibleTarget { norm: f64, budget: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
