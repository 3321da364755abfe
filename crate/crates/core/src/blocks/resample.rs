//! Patch embedding and the spike-driven resolution changers.

use rand::Rng;

use super::BlockEnv;
use crate::autograd::{ParamStore, Var};
use crate::energy::LayerKind;
use crate::error::{Error, Result};
use crate::layers::{ConvBn, Ctx};
use crate::ops;
use crate::spiking::NeuronConfig;

/// 3×3 conv + tdBN lifting the replicated RGB sequence to `c` channels.
#[derive(Clone, Debug)]
pub struct PatchEmbed {
    pub conv: ConvBn,
}

impl PatchEmbed {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, env: &BlockEnv, rng: &mut impl Rng) -> Self {
        Self {
            conv: ConvBn::new(store, name, 3, c, 3, 1, LayerKind::Dense, env.bn, rng),
        }
    }

    pub fn num_params(&self) -> usize {
        self.conv.num_params()
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let d = ctx.value(x).dims5()?;
        if d.c != 3 {
            return Err(Error::shape(format!("patch embedding expects 3 channels, got {}", d.c)));
        }
        self.conv.forward(ctx, x)
    }
}

/// NI-LIF, then a stride-2 3×3 conv doubling the channels, then tdBN.
#[derive(Clone, Debug)]
pub struct Downsample {
    pub name: String,
    pub conv: ConvBn,
    pub neuron: NeuronConfig,
}

impl Downsample {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, env: &BlockEnv, rng: &mut impl Rng) -> Self {
        Self {
            name: name.to_string(),
            conv: ConvBn::new(store, name, c, 2 * c, 3, 2, LayerKind::SpikeDriven, env.bn, rng),
            neuron: env.neuron,
        }
    }

    pub fn num_params(&self) -> usize {
        self.conv.num_params()
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let d = ctx.value(x).dims5()?;
        if d.h % 2 != 0 || d.w % 2 != 0 {
            return Err(Error::shape(format!("{}: cannot halve {}×{}", self.name, d.h, d.w)));
        }
        let s = ctx.nilif(x, &self.neuron, &format!("{}.sn", self.name))?;
        self.conv.forward(ctx, s)
    }
}

/// NI-LIF, nearest ×2 upsampling, then a 3×3 conv halving the channels and tdBN.
#[derive(Clone, Debug)]
pub struct UpsampleBlock {
    pub name: String,
    pub conv: ConvBn,
    pub neuron: NeuronConfig,
}

impl UpsampleBlock {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, env: &BlockEnv, rng: &mut impl Rng) -> Result<Self> {
        if !c.is_multiple_of(2) {
            return Err(Error::shape(format!("{name}: cannot halve {c} channels")));
        }
        Ok(Self {
            name: name.to_string(),
            conv: ConvBn::new(store, name, c, c / 2, 3, 1, LayerKind::SpikeDriven, env.bn, rng),
            neuron: env.neuron,
        })
    }

    pub fn num_params(&self) -> usize {
        self.conv.num_params()
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let d = ctx.value(x).dims5()?;
        let s = ctx.nilif(x, &self.neuron, &format!("{}.sn", self.name))?;
        let u = ops::upsample_nearest(&mut ctx.tape, s, 2 * d.h, 2 * d.w)?;
        self.conv.forward(ctx, u)
    }
}
