use std::path::PathBuf;

/// Errors produced by the augmentation, model, data and harness layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite loss or parameters (loss {loss}) at epoch {epoch}, batch {batch} (batch seed {batch_seed:#018x})")]
    NonFiniteLoss {
        loss: f64,
        epoch: usize,
        batch: usize,
        batch_seed: u64,
    },

    #[error("non-finite activations: {0}")]
    NonFiniteActivations(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Numerical blow-up during training rather than a usage or I/O problem.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. } | Error::NonFiniteActivations(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
