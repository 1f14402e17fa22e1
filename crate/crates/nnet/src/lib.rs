//! CPU neural-network engine used to learn spatial dependence fields:
//! dense tensors with gradient slots, layers with hand-written reverse-mode
//! passes, Adam, weight EMA, GAN losses and a binary checkpoint format.

pub mod activation;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod error;
pub mod gan;
pub mod gradcheck;
pub mod layer;
mod linalg;
pub mod loss;
pub mod network;
pub mod norm;
pub mod optim;
pub mod reshape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use error::{NnError, Result};
pub use gan::{EpochLosses, Gan, GanArch, GanConfig};
pub use layer::{Layer, LayerSpec, Mode};
pub use loss::{gan_losses, GanLosses};
pub use network::Sequential;
pub use optim::{adam_step, ema_update, AdamConfig, AdamState};
pub use tensor::Tensor;
