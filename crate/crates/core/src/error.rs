use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the breeding engine and its tooling.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A displacement is not an integer multiple of the state's lattice step.
    #[error("lattice error: displacement {amplitude} is not commensurate with lattice step {step}")]
    Lattice { amplitude: f64, step: f64 },

    /// Two states cannot be combined (different squeezing, complex offsets, ...).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A documented precondition on a value was violated.
    #[error("contract violated: {0}")]
    Contract(String),

    /// A serialized record or config is malformed.
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    /// A requested computation exceeds the configured resource limits.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { location: location.into(), message: message.into() }
    }
}
