use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input at row {row}, column {column}: {message}")]
    MalformedInput {
        row: usize,
        column: String,
        message: String,
    },

    #[error("timestamps are not hourly at row {row}: {message}")]
    Spacing { row: usize, message: String },

    #[error("channel `{0}` has no observed values")]
    EmptyChannel(String),

    #[error("fetch failed for `{name}`: {message}")]
    Fetch { name: String, message: String },

    #[error("integrity check failed for {path}: expected sha256 {expected}, found {actual}")]
    Integrity {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("phase alignment: {0}")]
    Alignment(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("failed: {0}")]
    Failed(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input or configuration, as
    /// opposed to failures while computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Usage(_) | Error::Parameter(_) | Error::Configuration(_) | Error::Json(_)
        )
    }
}

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Shape(format!($($arg)*))
    };
}

macro_rules! config_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Configuration(format!($($arg)*))
    };
}

pub(crate) use config_err;
pub(crate) use shape_err;
