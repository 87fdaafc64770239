use std::path::PathBuf;

use crate::contours::ContourFit;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("index out of range: face references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange { index: i64, count: usize },

    #[error("empty mesh: {0}")]
    EmptyMesh(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("contour fit did not converge after all restarts (best rss {:.6e})", best.rss)]
    NonConvergence { best: Box<ContourFit> },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("inconsistent configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation errors are caused by bad inputs or configuration; everything
    /// else is a runtime failure. The CLI maps the two onto exit codes 1 and 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::IndexOutOfRange { .. }
                | Error::EmptyMesh(_)
                | Error::UnsupportedFormat(_)
                | Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
