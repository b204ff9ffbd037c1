//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by estimation, ingestion and configuration code.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or degenerate input data (NaN cells, empty tails, constant columns, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A value fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be positive definite is not.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An iterative procedure did not converge.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// Bad run configuration (unknown estimator token, inconsistent flags, ...).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 data, 3 convergence, 4 config.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidData(_)
            | Error::Domain(_)
            | Error::NotPositiveDefinite(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::NonConvergence(_) => 3,
            Error::Config(_) => 4,
        }
    }
}
