//! Crate-wide error type and exit-code mapping used by the CLI.

use thiserror::Error;

use crate::model::LinearModel;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in `{path}`: {msg}")]
    Csv { path: String, msg: String },

    #[error("target column `{column}` not found in `{path}`")]
    MissingTarget { column: String, path: String },

    #[error("non-finite value in column `{column}`, row {row}")]
    NonFinite { column: String, row: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// All raw scores are zero (or non-positive after clipping), so no
    /// normalized importance exists.
    #[error("degenerate importance: {0}")]
    DegenerateImportance(String),

    #[error("predictor failure: {0}")]
    Predictor(String),

    /// Iterative solver ran out of iterations. Carries the last iterate so
    /// callers can inspect (or deliberately use) the unconverged model.
    #[error("solver did not converge after {iters} iterations (last max coefficient change {max_delta:.3e})")]
    NoConvergence {
        iters: usize,
        max_delta: f64,
        last: Box<LinearModel>,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

impl Error {
    /// Stable CLI exit code: 2 for configuration/input errors, 3 for
    /// predictor or solver failures, 4 for degenerate importance.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Predictor(_) | Error::NoConvergence { .. } => 3,
            Error::DegenerateImportance(_) => 4,
            _ => 2,
        }
    }
}
