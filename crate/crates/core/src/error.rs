use thiserror::Error;

use crate::kg::KgError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("{0}")]
    InvalidInput(String),
    #[error("cannot draw {requested} distinct filtered negatives, only {available} exist")]
    NegativesExhausted { requested: usize, available: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("template '{0}' has no valid grounding")]
    UnsatisfiableTemplate(String),
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
