use thiserror::Error;

/// Errors raised by the coding, bounding and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A code, scheme or modem description violates its invariants.
    #[error("configuration error: {0}")]
    Config(String),
    /// Caller-supplied data has the wrong shape or value.
    #[error("input error: {0}")]
    Input(String),
    /// Component spectra or frame lengths disagree with each other.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A bounded search ran out of room before finding what it was asked for.
    #[error("search limit exceeded: {0}")]
    LimitExceeded(String),
    /// A table would exceed the configured memory budget.
    #[error("resource error: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
