use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("no reachable pairs to train on")]
    NoReachablePairs,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("corrupt or incompatible file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonFinite(_) | Error::Diverged { .. })
    }
}
