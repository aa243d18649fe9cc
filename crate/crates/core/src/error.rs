//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, GviError>;

#[derive(Debug, Error)]
pub enum GviError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite objective or gradient at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("all {starts} optimization starts diverged")]
    AllStartsDiverged { starts: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("csv schema mismatch: missing or malformed column `{column}`")]
    SchemaMismatch { column: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl GviError {
    pub(crate) fn dims(expected: usize, actual: usize) -> Self {
        GviError::DimensionMismatch { expected, actual }
    }
}
