use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed bytes in a binary embedding file, or a value the format cannot encode.
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed input whose values are unusable (NaN, zero norm, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    /// A text input (JSONL / CSV) failed to parse or cross-validate.
    #[error("{path}:{line}: {message}")]
    Load {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("missing embeddings for {} id(s): {}", .0.len(), .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested statistic has no defined value for this input.
    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("design matrix is rank deficient; dependent column(s): {}", .0.join(", "))]
    RankDeficient(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors that come from the numerics rather than from the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Undefined(_) | Error::RankDeficient(_))
    }
}
