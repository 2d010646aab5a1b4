use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(f64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("session validation failed: {0}")]
    Validation(String),

    #[error("no loop found (best descriptor distance {best_distance:.4}, gate {gate:.4})")]
    NoLoopFound { best_distance: f64, gate: f64 },

    #[error("degenerate registration geometry (condition {condition:.3e})")]
    Degenerate { condition: f64 },

    #[error("alignment failed: {failed} of {total} scans did not converge")]
    AlignmentFailed {
        failed: usize,
        total: usize,
        diagnostics: Vec<String>,
    },

    #[error("instance too large for brute-force oracle: {0}")]
    TooLarge(String),

    #[error("config hash mismatch: archive {archive:016x}, config {config:016x}")]
    ConfigMismatch { archive: u64, config: u64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by malformed user input rather than a pipeline failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::NonFinite(_)
                | Error::Parse { .. }
                | Error::Format { .. }
                | Error::Validation(_)
                | Error::ConfigMismatch { .. }
                | Error::Io { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
