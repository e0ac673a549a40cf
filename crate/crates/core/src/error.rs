use thiserror::Error;

/// Errors raised by model construction, checks, and inference.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimensions, ranges, probabilities).
    #[error("invalid input: {0}")]
    Input(String),

    /// A 2^K enumeration was requested above the configured cap.
    #[error("capacity exceeded: K = {k} exceeds the enumeration cap of {cap}")]
    Capacity { k: usize, cap: usize },

    /// An operation was invoked in a mode that does not support it.
    #[error("usage error: {0}")]
    Usage(String),

    /// The sampler produced a non-finite quantity.
    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    /// A data file could not be parsed; rows and columns are 1-based.
    #[error("data error at row {row}, column {col}: {message}")]
    Data {
        row: usize,
        col: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
