//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by grid construction, assembly, solvers and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration document is malformed; `path` locates the offending field.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// The requested combination is outside the supported model class.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical procedure failed to converge or produced a degenerate result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
