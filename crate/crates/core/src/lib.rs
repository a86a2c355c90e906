//! Exact domination numbers for small graphs and neural surrogates that
//! learn to predict them.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the CLI and experiments.

pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod graph;
pub mod models;
pub mod rng;
pub mod solver;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Family, GenParams, Graph, VertexSet};
pub use tensor::{Mode, Scalar};

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type ParamSet64 = tensor::ParamSet<f64>;
pub type ParamSet32 = tensor::ParamSet<f32>;
pub type CnnModel64 = models::CnnModel<f64>;
pub type CnnModel32 = models::CnnModel<f32>;
pub type GinModel64 = models::GinModel<f64>;
pub type GinModel32 = models::GinModel<f32>;
