use thiserror::Error;

/// Errors produced by the reconstruction pipeline and its I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("degenerate contrast: region means are equal")]
    DegenerateContrast,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {what} is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    DimensionMismatch {
        what: String,
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }
}
