use gopnet_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    /// Invalid or inconsistent model configuration.
    #[error("config: {0}")]
    Config(String),
    /// A parse failure in a serialized config or checkpoint.
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
