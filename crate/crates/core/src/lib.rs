//! Spiking encoder-decoder for underwater image enhancement.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`], [`autograd`], [`ops`]: dense `f32` tensors with a
//!   reverse-mode tape and the primitives the network needs.
//! * [`spiking`]: multi-level (NI-LIF) and binary LIF neurons with surrogate
//!   gradients, plus threshold-dependent batch normalisation.
//! * [`blocks`]: the multi-scale pooling LIF block, frequency decomposition,
//!   multi-dimensional attention and the spiking residual block.
//! * [`network`]: the three-level encoder-decoder and checkpoints.
//! * [`loss`], [`energy`], [`data`]: training objective and metrics, the
//!   MAC/AC energy proxy, image I/O and synthetic degradations.
//! * [`config`], [`optim`], [`app`]: run configuration, Adam and the
//!   command implementations behind the `uiesnn` binary.

pub mod app;
pub mod autograd;
pub mod config;
pub mod blocks;
pub mod data;
pub mod energy;
mod error;
pub mod layers;
pub mod loss;
pub mod network;
pub mod ops;
pub mod optim;
pub mod spiking;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Dims5, Tensor};
