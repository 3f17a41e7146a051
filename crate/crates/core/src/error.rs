use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated the documented preconditions.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// An iteration failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The discretization is too coarse for the requested accuracy.
    #[error("insufficient accuracy: {0}")]
    Accuracy(String),
    /// The requested problem size is outside what the routine supports.
    #[error("unsupported problem size: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
