//! Minimal reverse-mode differentiation for dense and GRU stacks.
//!
//! Activations flow as [`Tensor`]s laid out `[steps, batch, features]`,
//! stored time-major in a single matrix so dense layers can treat every
//! time step as an extra batch row. A forward pass returns a [`Trace`]
//! holding what the backward pass needs; the same network can be run
//! several times before any backward call.

mod layers;
mod loss;
mod network;
mod optim;
mod tensor;

pub use layers::{Activation, LayerSpec};
pub use loss::{bce_loss, mean_l2_distance};
pub use network::{Gradients, NetworkParams, Trace, TrainableNetwork};
pub use optim::{AdamConfig, OptimizerState};
pub use tensor::Tensor;
