//! Composite blocks built from convolutions, tdBN and spiking neurons.

mod fdm;
mod mda;
mod mplb;
mod resample;
pub mod spikemap;
mod srb;

pub use fdm::Fdm;
pub use mda::Mda;
pub use mplb::Mplb;
pub use resample::{Downsample, PatchEmbed, UpsampleBlock};
pub use srb::Srb;

use serde::{Deserialize, Serialize};

use crate::spiking::{NeuronConfig, TdBnConfig};

/// Hyperparameters shared by every block of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockEnv {
    pub neuron: NeuronConfig,
    pub bn: TdBnConfig,
    pub timesteps: usize,
}

impl BlockEnv {
    pub fn new(neuron: NeuronConfig, alpha_bn: f32, timesteps: usize) -> Self {
        Self {
            neuron,
            bn: TdBnConfig::new(alpha_bn, neuron.v_th),
            timesteps,
        }
    }
}

/// Which optional components a residual block contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub fdm: bool,
    pub mda: bool,
    pub mplb: bool,
}

impl Toggles {
    pub const ALL: Toggles = Toggles {
        fdm: true,
        mda: true,
        mplb: true,
    };
    pub const NONE: Toggles = Toggles {
        fdm: false,
        mda: false,
        mplb: false,
    };
}

impl Default for Toggles {
    fn default() -> Self {
        Self::ALL
    }
}
