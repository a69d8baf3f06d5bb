use thiserror::Error;

/// Errors raised by the detection library.
#[derive(Debug, Error)]
pub enum StemError {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data or configuration.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StemError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(StemError::Domain(msg.into()))
}
