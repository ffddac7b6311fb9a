//! Inception-style and VGG-style classifiers built from declarative specs.

mod inception;
mod layers;
mod net;
mod spec;

pub use inception::{validate_branches, BranchKind, InceptionBranchSpec, InceptionModule};
pub use layers::{scaled_uniform, ConvLayer, Dense};
pub use net::{total_loss, BatchGradients, ForwardOutput, FreezeMode, Model};
pub use spec::{AuxHeadSpec, Block, Head, ModelSpec, DEFAULT_AUX_DISCOUNT, DEFAULT_HIDDEN};
