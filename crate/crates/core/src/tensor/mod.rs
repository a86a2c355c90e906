//! Dense tensors, reverse-mode differentiation, and optimization.

pub mod checkpoint;
mod optim;
mod params;
mod scalar;
mod tape;
#[allow(clippy::module_inception)]
mod tensor;

pub use checkpoint::Checkpoint;
pub use optim::{clip_grad_norm, AdamState};
pub use params::{Gradients, ParamId, ParamSet};
pub use scalar::Scalar;
pub use tape::{BatchNormMode, NeighborIndex, Tape, Var};
pub use tensor::Tensor;

/// Whether a forward pass updates normalization statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
