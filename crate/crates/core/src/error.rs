use thiserror::Error;

/// Errors raised by the collision-model library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid qubit targets: {0}")]
    InvalidTargets(String),
    #[error("cannot combine a pure state vector with a density matrix")]
    KindMismatch,
    #[error("{what} = {got} exceeds the limit of {limit}")]
    LimitExceeded { what: &'static str, limit: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
