use thiserror::Error;

/// Errors raised by coreset constructions and their supporting kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The data itself is unusable (non-finite entries, negative weights, empty sets).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A parameter is out of its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An exhaustive routine was asked to enumerate more than it can afford.
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    /// A streaming summary was queried before any point arrived.
    #[error("empty state: {0}")]
    EmptyState(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn invalid_argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
