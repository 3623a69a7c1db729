use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] seglab_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{failed} of {total} sweep rows failed")]
    SweepFailed { failed: usize, total: usize },

    #[error("verdict failed: {0}")]
    Verdict(String),
}

impl LabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        LabError::Parse { path: path.into(), message: message.to_string() }
    }

    /// Process exit code: 2 for configuration problems, 3 for solver
    /// failures, 4 for failed verdicts.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Parse { .. } => 2,
            LabError::Core(seglab_core::Error::InvalidArgument(_) | seglab_core::Error::InvalidGrid(_)) => 2,
            LabError::Verdict(_) => 4,
            _ => 3,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
