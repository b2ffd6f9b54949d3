use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by ingestion, configuration and scoring.
#[derive(Debug, Error)]
pub enum CrackError {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("column {column} ({name}): {reason}")]
    Column {
        column: usize,
        name: String,
        reason: String,
    },

    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("overlapping selectors: column {0} is in both X and Y")]
    OverlappingSelectors(usize),

    #[error("invalid selector `{0}`")]
    InvalidSelector(String),

    #[error("selector references column {index} but the table has {columns} columns")]
    SelectorOutOfRange { index: usize, columns: usize },

    #[error("{0} side is empty")]
    EmptySide(&'static str),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no informative attributes: {0}")]
    Degenerate(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CrackError {
    pub(crate) fn column(column: usize, name: &str, reason: impl Into<String>) -> Self {
        CrackError::Column {
            column,
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CrackError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than an internal fault.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, CrackError::Invariant(_))
    }
}

pub type Result<T, E = CrackError> = std::result::Result<T, E>;
