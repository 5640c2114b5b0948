use thiserror::Error;
use wcrisk_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    /// 1 for configuration problems, 2 for numerical failures, 3 for violated
    /// preconditions of the bound formulas.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::InvalidParameter(_) | CoreError::Capacity { .. } => 1,
                CoreError::UnsupportedDistortion | CoreError::AssumptionViolation(_) => 3,
                CoreError::NoSolution(_)
                | CoreError::NoWitness(_)
                | CoreError::InfeasibleTarget { .. }
                | CoreError::InternalConsistency(_) => 2,
            },
            CliError::ChecksFailed { .. } => 2,
        }
    }
}
