//! Feedforward/convolutional network engine: layers, reverse-mode
//! gradients with tap injection, momentum SGD and checkpoints.

pub mod checkpoint;
mod gemm;
mod layer;
mod loss;
mod network;
mod sgd;

pub use layer::{Layer, LayerSpec};
pub use loss::softmax_xent;
pub use network::{Architecture, ForwardPass, GradSeed, Gradients, Mode, Network, Tap};
pub use sgd::SgdState;

pub(crate) use network::argmax;
