use thiserror::Error;

/// Errors raised by the window-selection library.
#[derive(Debug, Error)]
pub enum BawsError {
    /// An input lies outside the domain of an operation (empty window, non-finite value, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A tuning parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient history: need at least {needed} observations, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    /// Malformed input data; `row` is 1-based over data rows (header excluded).
    #[error("data error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BawsError>;

pub(crate) fn domain(msg: impl Into<String>) -> BawsError {
    BawsError::Domain(msg.into())
}

pub(crate) fn parameter(msg: impl Into<String>) -> BawsError {
    BawsError::Parameter(msg.into())
}
