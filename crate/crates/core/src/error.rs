use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema has no dimensions")]
    EmptySchema,

    #[error("dimension `{0}` has no columns")]
    EmptyDimension(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("duplicate dimension name `{0}`")]
    DuplicateDimension(String),

    #[error("key has {actual} cells, schema has {expected} columns")]
    KeyLength { expected: usize, actual: usize },

    #[error("expected a fully concrete key, found `*` at column {column}")]
    NotConcrete { column: usize },

    #[error("invalid grouping: {0}")]
    Grouping(String),

    #[error(
        "segment does not match the input shape of phase {phase}: column {column} must be concrete"
    )]
    ShapeMismatch { phase: usize, column: usize },

    #[error("count overflow while aggregating segment {key}")]
    Overflow { key: String },

    #[error("reducer for key {key} failed: {source}")]
    Reducer {
        key: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("cube files have different headers: {a:?} vs {b:?}")]
    SchemaMismatch { a: Vec<String>, b: Vec<String> },

    #[error("value {0:?} cannot be stored (tab or newline)")]
    UnencodableValue(String),

    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid simulator config: {0}")]
    SimConfig(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
