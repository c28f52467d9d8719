//! Crate-wide error type, between user mistakes and numerical failures.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a precondition (non-finite entries, asymmetry, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A file could not be parsed.
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        message: String,
        line: Option<usize>,
    },

    /// Configuration file is malformed or violates the schema.
    #[error("config error: {0}")]
    Config(String),

    /// An iterative method failed to converge or a linear system is unsolvable.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A pipeline stage failed as a whole (e.g. every offline evaluation).
    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(msg: impl Into<String>, line: Option<usize>) -> Self {
        Error::Parse {
            message: msg.into(),
            line,
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}
