use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0} is undefined for a constant series")]
    ConstantSeries(&'static str),

    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric cell {cell:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("invalid data at row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("not a frame stream: no sync pattern found")]
    NotAFrameStream,

    #[error("signals unrelatable: alignment correlation {0:.3} below threshold")]
    Unrelatable(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn empty(what: impl Into<String>) -> Self {
        Error::Empty(what.into())
    }
}
