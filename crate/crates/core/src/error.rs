use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("design matrix is rank deficient (column {column})")]
    Singular { column: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("no rows retained after attaching labels")]
    EmptyDataset,
    #[error("no between-group pairs: every row carries the same label")]
    NoBetweenPairs,
    #[error("no within-group pairs: every label occurs once")]
    NoWithinPairs,
    #[error("row {row} is degenerate: all distances to other points are zero")]
    DegenerateRow { row: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("unknown class label {0:?}")]
    UnknownClass(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("merge would produce the reserved label {0:?}")]
    ReservedLabel(String),
    #[error("alpha is undefined: {0}")]
    UndefinedAlpha(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
