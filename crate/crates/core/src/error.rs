use std::path::PathBuf;

use crate::spectral::SymMatrix;

/// Errors raised by the numerical library and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The objective/gradient oracle failed while the optimizer was evaluating an iterate.
    #[error("oracle failed at iteration {iteration}: {source}")]
    OracleFailure {
        iteration: usize,
        iterate: Box<SymMatrix>,
        #[source]
        source: Box<Error>,
    },

    #[error("metric too close to the PSD boundary for finite-difference step {step:e} (min eigenvalue {min_eigenvalue:e})")]
    BoundaryProximity { step: f64, min_eigenvalue: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("{path}:{line}: schema error: {message}")]
    Schema {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
