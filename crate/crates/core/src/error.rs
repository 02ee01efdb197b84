use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The three broad families map onto the command-line exit codes:
/// configuration and validation problems are the caller's fault, numerical
/// failures are not.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("admissibility error: {0}")]
    Admissibility(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}
