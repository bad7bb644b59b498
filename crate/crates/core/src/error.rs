use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing header row")]
    MissingHeader,
    #[error("empty column name at position {0}")]
    EmptyHeaderName(usize),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("no target column declared")]
    NoTarget,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid target value `{value}` at row {row}")]
    InvalidTarget { row: usize, value: String },
    #[error("schema hint, line {line}: {message}")]
    SchemaHint { line: usize, message: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("auroc is undefined for single-class labels")]
    SingleClass,
    #[error("at least {needed} values required, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("model file: bad magic bytes")]
    BadMagic,
    #[error("model file: unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("model file: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("model file truncated")]
    Truncated,
    #[error("model file malformed: {0}")]
    Malformed(String),
    #[error("report: {0}")]
    Report(String),
    #[error("repeat {repeat} failed: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
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
