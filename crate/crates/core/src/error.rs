//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Header or schema does not line up with the expected columns.
    #[error("schema error: {0}")]
    Schema(String),

    /// A feature cell could not be read as a finite number. `row` is the
    /// 1-based data row (the header is not counted).
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("label error at row {row}: unknown label {value:?}")]
    Label { row: usize, value: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("predict error: {0}")]
    Predict(String),

    #[error("degenerate leaf: hessian sum plus lambda is zero")]
    DegenerateLeaf,

    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Model file decoded but a field is missing, malformed, or inconsistent.
    #[error("model load error at `{field}`: {message}")]
    ModelLoad { field: String, message: String },

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    Version { found: i64, supported: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
