use thiserror::Error;

/// Errors raised by the calibration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input row; `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input that parsed but violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Caller broke an operation contract (e.g. mismatched ids).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The session is in the wrong phase for the requested action.
    #[error("phase error: {0}")]
    Phase(String),

    #[error("unauthorized: {0}")]
    Unauthorized(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn phase(msg: impl Into<String>) -> Self {
        Error::Phase(msg.into())
    }
}
