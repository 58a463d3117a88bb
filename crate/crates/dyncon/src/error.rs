use std::path::PathBuf;

use thiserror::Error;

use crate::csvio::SeriesError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Series(#[from] SeriesError),

    #[error("solver error ({name}): {0}", name = solver_error_name(.0))]
    Solver(#[from] dyncon_core::Error),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The artifact was solved for a different model.
    #[error("stale artifact: {0}")]
    Stale(String),

    #[error("malformed artifact: {0}")]
    Artifact(String),

    #[error("incentive compatibility check failed")]
    IcViolation,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Series(_) => 2,
            CliError::Solver(_) | CliError::Io { .. } => 3,
            CliError::Stale(_) | CliError::Artifact(_) => 4,
            CliError::IcViolation => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub fn solver_error_name(e: &dyncon_core::Error) -> &'static str {
    use dyncon_core::Error::*;
    match e {
        InvalidModel(_) => "InvalidModel",
        InvalidGrid(_) => "InvalidGrid",
        InvalidParams(_) => "InvalidParams",
        InvalidSeries(_) => "InvalidSeries",
        NoIncentivizingSensitivity { .. } => "NoIncentivizingSensitivity",
        CflViolation { .. } => "CflViolation",
        NonFiniteValue { .. } => "NonFiniteValue",
        OutOfBounds { .. } => "OutOfBounds",
        GridEscape { .. } => "GridEscape",
    }
}
