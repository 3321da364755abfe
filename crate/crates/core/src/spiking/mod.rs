//! Spiking neurons and threshold-dependent batch normalisation.

mod neuron;
mod tdbn;

pub use neuron::{
    binary_lif, binary_lif_forward, nilif, nilif_forward, surrogate_grad, FreezeMode, NeuronConfig,
};
pub use tdbn::{tdbn, RunningStats, TdBnConfig, BN_EPS};
