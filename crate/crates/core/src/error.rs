use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The new Cholesky pivot fell below the relative tolerance, i.e. the
    /// appended atom is (numerically) in the span of the active ones.
    #[error("singular Cholesky update: pivot {pivot:e} <= tolerance {tolerance:e}")]
    SingularUpdate { pivot: f64, tolerance: f64 },

    #[error("empty selection: largest correlation {max_correlation:e} is not above tolerance")]
    EmptySelection { max_correlation: f64 },

    #[error("bad fraction: {0}")]
    BadFraction(String),

    #[error("degenerate sampling weights")]
    DegenerateWeights,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite training loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, line: usize, key: String },

    #[error("malformed CSV row at line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("non-numeric feature at line {line}, column `{column}`: {value:?}")]
    NonNumericFeature { line: usize, column: String, value: String },

    #[error("label out of range at line {line}: {value:?}")]
    LabelOutOfRange { line: usize, value: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
