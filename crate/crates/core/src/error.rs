use thiserror::Error;

/// Errors raised by state construction, circuit evaluation, training and the task drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode count mismatch: expected {expected}, got {actual}")]
    ModeMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unphysical covariance: {0}")]
    Unphysical(String),

    #[error("output step {step} is not in the retained window")]
    Evicted { step: usize },

    #[error("non-finite cost at update {update}: {detail}")]
    NonFinite { update: usize, detail: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
