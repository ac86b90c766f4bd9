//! Action-smoothness regularization for image-based soft actor-critic on a
//! 2D closed-track racing simulator.
//!
//! Modules:
//! - [`simulator`]: track geometry, kinematic bicycle dynamics, reward, rendering.
//! - [`nn`]: tensors, conv/dense networks with hand-written gradients, Adam, checkpoints.
//! - [`transforms`]: photometric and geometric image transforms, random convolution.
//! - [`regularizers`]: temporal/spatial smoothness penalties and the IR adaptive weight.
//! - [`sac`]: replay buffer, soft actor-critic updates and the training loop.
//! - [`metrics`]: amplitude spectrum, smoothness value, policy evaluation.
//! - [`experiment`]: configuration files, train/eval/ablate/export commands.

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod parallel;
pub mod regularizers;
pub mod sac;
pub mod simulator;
pub mod transforms;

pub use error::{Error, Result};
