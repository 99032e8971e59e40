use thiserror::Error;

/// Errors surfaced by model construction, likelihood evaluation, fitting,
/// simulation and file ingestion.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its mathematical domain (bad subtype index,
    /// non-positive time, dimension mismatch, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A dataset violates an invariant required by the requested operation.
    #[error("data error: {0}")]
    Data(String),

    /// An estimator or model was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    /// Model fitting could not start or produced no usable result.
    #[error("fit error: {0}")]
    Fit(String),

    /// A linear solve or matrix factorization failed beyond rescue.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A structured text file (scenario, schema) failed to parse.
    #[error("parse error in {file} line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for the CLI: 2 for usage/configuration
    /// problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Data(_)
            | Error::Config(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Csv(_) => 2,
            Error::Fit(_) | Error::Numerical(_) => 3,
        }
    }
}
