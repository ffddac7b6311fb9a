//! Dense tensors, a reverse-mode autodiff graph, and the convolutional
//! classifiers trained on top of it.
//!
//! Everything is CPU-only and generic over [`Real`] so the same code runs in
//! `f32` for training and `f64` for finite-difference checks.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod models;
pub mod optim;
pub mod params;
pub mod real;
pub mod tensor;

pub use error::{CoreError, Result};
pub use graph::{Gradients, Graph, NodeId};
pub use models::{FreezeMode, Model, ModelSpec};
pub use optim::Sgd;
pub use params::ParamStore;
pub use real::Real;
pub use tensor::Tensor;
