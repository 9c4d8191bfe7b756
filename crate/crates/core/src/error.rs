use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PavaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PavaError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("matrix is not square: row {row} has {found} entries, expected {expected}")]
    NotSquare {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("matrix is asymmetric at ({row}, {column}): {a} vs {b}")]
    Asymmetric {
        row: usize,
        column: usize,
        a: f64,
        b: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("unknown shape `{0}`")]
    UnknownShape(String),
}

impl PavaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PavaError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            PavaError::InvalidParameter(_)
                | PavaError::UnknownShape(_)
                | PavaError::LengthMismatch(..)
        )
    }
}
