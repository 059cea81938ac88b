use thiserror::Error;

/// Errors produced by the identification, interconnection and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sample period mismatch: {0} s vs {1} s")]
    SamplePeriod(f64, f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("ill-posed feedback interconnection: 1 + DpDc has reciprocal condition {rcond:.3e}")]
    IllPosed { rcond: f64 },

    #[error("{what} is numerically singular (rcond = {rcond:.3e}); {hint}")]
    Singular {
        what: &'static str,
        rcond: f64,
        hint: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sequence too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("episode {index} (seed {seed}) failed: {reason}")]
    EpisodeFailed { index: usize, seed: u64, reason: String },

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
