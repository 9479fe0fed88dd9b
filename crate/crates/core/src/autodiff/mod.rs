//! Small fixed-topology reverse-mode substrate: dense tensors, dense layers
//! with hand-chained backward passes, Adam, and JSON checkpoints.

mod adam;
mod checkpoint;
mod dense;
pub mod ops;
mod param;
mod tensor;

pub use adam::{AdamConfig, adam_step};
pub use checkpoint::{Checkpoint, TensorRecord};
pub use dense::{Activation, DenseLayer, Mlp};
pub use param::Parameter;
pub use tensor::Tensor2;
