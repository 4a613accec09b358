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

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("column `{column}` is not {expected}")]
    ColumnType {
        column: String,
        expected: &'static str,
    },

    #[error("column `{0}` still has missing values")]
    MissingValue(String),

    #[error("column `{0}` has no observed values to impute from")]
    AllMissing(String),

    #[error("no encoder fitted for feature `{0}`")]
    MissingEncoder(String),

    #[error("invalid code table: {0}")]
    CodeTable(String),

    #[error("invalid insert code: {0}")]
    InsertCode(String),

    #[error("empty vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("invalid embedding table: {0}")]
    EmbeddingTable(String),

    #[error("no embedding available for description `{0}`")]
    UnknownDescription(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("feature index {0} has no group label")]
    Ungrouped(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Schema(_) => "schema",
            Error::UnknownColumn(_) => "unknown_column",
            Error::MissingColumn(_) => "missing_column",
            Error::DuplicateColumn(_) => "duplicate_column",
            Error::RowLength { .. } => "row_length",
            Error::Empty(_) => "empty",
            Error::ColumnType { .. } => "column_type",
            Error::MissingValue(_) => "missing_value",
            Error::AllMissing(_) => "all_missing",
            Error::MissingEncoder(_) => "missing_encoder",
            Error::CodeTable(_) => "code_table",
            Error::InsertCode(_) => "insert_code",
            Error::EmptyVocabulary(_) => "empty_vocabulary",
            Error::EmbeddingTable(_) => "embedding_table",
            Error::UnknownDescription(_) => "unknown_description",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonFinite(_) => "non_finite",
            Error::Degenerate(_) => "degenerate",
            Error::Ungrouped(_) => "ungrouped",
        }
    }
}
