use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid header: {0}")]
    Header(String),

    #[error("size mismatch: header declares {expected} samples, body holds {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("non-finite sample at band {band}, row {row}, col {col}")]
    NonFinite { band: usize, row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid training data: {0}")]
    Training(String),

    #[error("class '{class}' has {count} pixels, at least {required} are needed")]
    TooFewPixels {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("degenerate polygon (zero area)")]
    DegeneratePolygon,

    #[error("matrix is not positive definite{0}")]
    NotPositiveDefinite(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid rule set: {0}")]
    Rules(String),

    #[error("unknown attribute '{0}'")]
    UnknownAttribute(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical core (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite(_))
    }
}
