//! Residual 1D convolutional classifier with a global-average-pooling head.
//!
//! Every block is `relu(conv(x) + b)`, plus the block input when the block
//! is residual and its input and output shapes agree. The last block's
//! feature maps are averaged over positions and fed to one linear layer,
//! which is exactly the structure class activation maps rely on.

mod adam;
mod checkpoint;
mod config;
mod model;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{Activation, BlockConfig, LayerShape, ModelConfig};
pub use model::{
    backward, batch_gradient, cross_entropy, forward, predict, BatchGradient, BlockTrace,
    ForwardTrace,
};
pub use params::{init_params, ModelParams};
pub(crate) use model::argmax;
pub use train::{evaluate, normalize_batch, normalize_counts, train, TrainOutcome, TrainSettings};
