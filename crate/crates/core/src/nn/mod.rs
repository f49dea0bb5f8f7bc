//! A small CPU neural-network engine: exactly the layers the Q-network
//! needs, with analytic backward passes.

pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod optim;
mod scalar;
mod tensor;

pub use layers::{same_padding, Activation};
pub use network::{
    q_network_layers, stacks_to_tensor, Gradients, Layer, LayerSpec, Mode, Network, QNetwork,
};
pub use optim::{clip_global_norm, Adam};
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor;
