use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "state is singular (min eigenvalue {min_eigenvalue:e}); regularize before factorizing"
    )]
    SingularState { min_eigenvalue: f64 },

    #[error("tau matrix is degenerate: Tr(tau^dagger tau) = {trace:e}")]
    DegenerateTau { trace: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("projector count {0} outside 1..=36")]
    BadCount(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dataset has no training samples")]
    EmptyDataset,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("format version mismatch in {path}: found {found}, expected {expected}")]
    FormatVersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(PathBuf),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that come from floating-point trouble rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularState { .. }
                | Error::DegenerateTau { .. }
                | Error::NumericalFailure(_)
                | Error::Consistency(_)
        )
    }
}
