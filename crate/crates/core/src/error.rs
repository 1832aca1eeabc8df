use std::path::PathBuf;

use thiserror::Error;

use crate::io::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} in {context} at ({row}, {col})")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("{context}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("negative weight {value} in {context} at ({row}, {col})")]
    NegativeWeight {
        context: String,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("importance must be strictly positive, row {row} has {value}")]
    NonPositiveImportance { row: usize, value: f64 },

    #[error("unknown layer '{0}'")]
    UnknownLayer(String),

    #[error("unknown factorization method '{0}'")]
    UnknownMethod(String),

    #[error("layer '{layer}': {reason}")]
    Layer { layer: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}, batch {batch} (loss {loss})")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("non-finite gradient while accumulating Fisher information at example {example}")]
    NonFiniteGradient { example: usize },

    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure classes, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Diverged { .. } | Error::NonFiniteGradient { .. } => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn layer(layer: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Layer {
            layer: layer.into(),
            reason: reason.into(),
        }
    }
}
