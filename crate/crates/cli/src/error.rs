use thiserror::Error;

/// Failures of an experiment run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("invariant breach: {0}")]
    Invariant(String),

    #[error(transparent)]
    Core(#[from] polycert_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use polycert_core::Error as E;
        match self {
            CliError::Params(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Core(E::InvalidParameters(_) | E::DimensionMismatch { .. } | E::DimensionTooLarge { .. }) => 2,
            CliError::Core(
                E::EmptyPolytope
                | E::NoInterior { .. }
                | E::Infeasible
                | E::InfeasibleInstance(_)
                | E::InfeasibleAgent(_),
            ) => 3,
            _ => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
