//! Small dense networks with hand-written backpropagation, an Adam
//! optimizer, target-network averaging and a squashed Gaussian policy head.

mod checkpoint;
mod network;
mod optim;
mod policy;

pub use checkpoint::{Checkpoint, CheckpointEntry, FORMAT_VERSION};
pub use network::{soft_update, Activation, ForwardCache, Gradients, Layer, LayerGrad, Network};
pub use optim::{Adam, AdamConfig, ScalarAdam};
pub use policy::{log_one_minus_tanh_sq, softplus, SquashedGaussian, SquashedSample};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("configuration error: {0}")]
    Dimension(String),
    #[error("non-finite gradient in layer {layer} {param}[{index}]")]
    NonFinite { layer: usize, param: &'static str, index: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
