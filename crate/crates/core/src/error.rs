use std::path::PathBuf;

use thiserror::Error;

use crate::common::ValidationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation was called out of order, e.g. `inference` before `fit`.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("no checkpoints found in {}", .0.display())]
    NoCheckpoints(PathBuf),

    #[error("non-finite training loss at epoch {epoch}")]
    NumericFailure { epoch: usize },

    #[error("cross-validation fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable name for the error class, used in machine-readable output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(v) => v.code.as_str(),
            Error::Shape(_) => "ShapeMismatch",
            Error::Protocol(_) => "ProtocolError",
            Error::DegenerateLabels(_) => "DegenerateLabels",
            Error::NoCheckpoints(_) => "NoCheckpoints",
            Error::NumericFailure { .. } => "NumericFailure",
            Error::Fold { source, .. } => source.code(),
            Error::Io { .. } => "IoError",
        }
    }
}
