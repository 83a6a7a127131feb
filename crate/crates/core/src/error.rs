//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaniceError {
    /// Input or parameter vector has the wrong length.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A point lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Support size exceeds what the exact solver accepts.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Gradient or parameter became non-finite during optimization.
    #[error("training diverged at step {step}: {detail}")]
    TrainingDiverged { step: usize, detail: String },

    /// Divergence detected by the training loop; carries the last finite
    /// checkpoint so callers can salvage it.
    #[error("training diverged at step {step}; last finite checkpoint attached")]
    Diverged {
        step: usize,
        checkpoint: Box<crate::estimator::TrainedModel>,
    },

    /// Configuration file failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// Operation is not supported for the given variant.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GaniceError>;

impl GaniceError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        GaniceError::Io {
            path: path.into(),
            source,
        }
    }
}
