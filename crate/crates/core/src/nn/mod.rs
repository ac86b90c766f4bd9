//! Small tensor and neural-network engine with reverse-mode gradients.

mod adam;
mod checkpoint;
mod network;
mod params;
pub mod policy;
mod scalar;
mod tensor;

pub use adam::{adam_update, Adam, AdamConfig};
pub use checkpoint::{Checkpoint, MANIFEST_FILE, PARAMS_FILE};
pub use network::{
    Activation, BackwardWants, ConvGeom, ConvSpec, ForwardCache, Gradients, Head, InputShape,
    Layout, Network, NetworkSpec, ACTION_DIM, CHUNK,
};
pub use params::ParamSet;
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor;
