use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("point {point:?} lies outside the grid extent")]
    OutOfExtent { point: [f64; 3] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("solver exceeded {max_iter} iterations (last residual {residual:e})")]
    MaxIterations { max_iter: usize, residual: f64 },

    #[error("NaN detected at solver step {step}")]
    NanDetected { step: usize },

    #[error("every radius fell below the H floor")]
    EmptyCurve,

    #[error("field format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
