//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, likelihood evaluation and the sweep harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input is structurally valid but not supported by this operation.
    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    /// Two operands that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    /// A configuration file or key set failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed text input (CSV or config files).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
