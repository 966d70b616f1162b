use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes or kinds do not conform for an operation.
    #[error("shape error: {0}")]
    Shape(String),
    /// A configuration value violates an invariant.
    #[error("configuration error: {0}")]
    Config(String),
    /// An API was used out of contract (non-scalar loss, untrained baseline, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A file did not match its expected layout.
    #[error("format error in {field}: {detail}")]
    Format { field: String, detail: String },
    /// Training produced a non-finite loss.
    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            detail: detail.into(),
        }
    }
}
