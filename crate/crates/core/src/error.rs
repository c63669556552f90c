use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Manifest parsing or validation failure, with file context.
    #[error("manifest error ({path}): {message}")]
    Manifest { path: PathBuf, message: String },

    /// Binary/CSV trial data does not match its declared shape.
    #[error("data format error ({path}): {message}")]
    DataFormat { path: PathBuf, message: String },

    /// A precondition on an operation's inputs was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Signal content makes the requested quantity undefined.
    #[error("degenerate signal: {0}")]
    Degenerate(String),

    /// Filter design produced unstable coefficients.
    #[error("unstable filter: {0}")]
    Filter(String),

    /// Numerical failure during iterative computation.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn manifest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Manifest {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::DataFormat {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 1 for input/validation problems,
    /// 2 for failures arising during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Manifest { .. }
            | Error::DataFormat { .. }
            | Error::InvalidArgument(_) => 1,
            Error::Degenerate(_) | Error::Filter(_) | Error::Numeric(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
