//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("unknown category {value:?} in column {column:?} (row {row})")]
    UnknownCategory {
        column: String,
        value: String,
        row: usize,
    },

    #[error("missing cell in column {column:?} at row {row}")]
    MissingCell { column: String, row: usize },

    #[error("target column {column:?} is not binary: {detail}")]
    NonBinaryTarget { column: String, detail: String },

    #[error("invalid prior for column {column:?}: {detail}")]
    InvalidPrior { column: String, detail: String },

    #[error("dataset meta is missing {what} for column {column:?}")]
    MissingMeta { column: String, what: String },

    #[error("column layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged for {kind} at epoch {epoch}: loss = {loss}")]
    Diverged {
        kind: String,
        epoch: usize,
        loss: f64,
    },

    #[error("evaluation cell {cell} failed: {detail}")]
    Cell { cell: String, detail: String },

    #[error("reference table has no cell for {0}")]
    MissingReferenceCell(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
