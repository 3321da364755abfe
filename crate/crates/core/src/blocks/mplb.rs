//! Multi-scale pooling LIF block.
//!
//! The input is split into four channel groups. Each group is pooled at its
//! own scale (identity, 4×4, 2×2, global), spiked by an NI-LIF neuron,
//! projected by a 1×1 conv + tdBN and brought back to full resolution. The
//! pixel-level branch is mixed pairwise with each coarse branch, the four
//! results are reweighted by per-channel `θ` and fused by a 3×3 conv + tdBN.

use rand::Rng;

use super::BlockEnv;
use crate::autograd::{ParamId, ParamStore, Var};
use crate::energy::LayerKind;
use crate::error::{Error, Result};
use crate::layers::{ConvBn, Ctx};
use crate::ops;
use crate::spiking::NeuronConfig;
use crate::tensor::Tensor;

/// Pooling window per branch; `None` is global average pooling.
pub const BRANCH_POOL: [Option<usize>; 4] = [Some(1), Some(4), Some(2), None];

#[derive(Clone, Debug)]
pub struct Mplb {
    pub name: String,
    pub channels: usize,
    pub branch: Vec<ConvBn>,
    pub mix: Vec<ConvBn>,
    pub theta: [ParamId; 4],
    pub fuse: ConvBn,
    pub neuron: NeuronConfig,
}

impl Mplb {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, env: &BlockEnv, rng: &mut impl Rng) -> Result<Self> {
        if !c.is_multiple_of(4) || c == 0 {
            return Err(Error::shape(format!("{name}: {c} channels cannot be split into four groups")));
        }
        let q = c / 4;
        let spike = LayerKind::SpikeDriven;
        let branch = (1..=4)
            .map(|i| ConvBn::new(store, &format!("{name}.branch{i}"), q, q, 1, 1, spike, env.bn, rng))
            .collect();
        let mix = (1..=3)
            .map(|i| ConvBn::new(store, &format!("{name}.mix{i}"), 2 * q, q, 1, 1, spike, env.bn, rng))
            .collect();
        let theta =
            std::array::from_fn(|i| store.add(format!("{name}.theta{}", i + 1), Tensor::full(&[1, 1, q, 1, 1], 1.0), true));
        let fuse = ConvBn::new(store, &format!("{name}.fuse"), c, c, 3, 1, spike, env.bn, rng);
        Ok(Self {
            name: name.to_string(),
            channels: c,
            branch,
            mix,
            theta,
            fuse,
            neuron: env.neuron,
        })
    }

    pub fn num_params(&self) -> usize {
        let convs: usize = self.branch.iter().chain(&self.mix).map(ConvBn::num_params).sum();
        convs + self.channels + self.fuse.num_params()
    }

    /// Spike label of branch `i` (1-based), as seen by probes.
    pub fn spike_label(&self, i: usize) -> String {
        format!("{}.sn{i}", self.name)
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let d = ctx.value(x).dims5()?;
        if d.c != self.channels {
            return Err(Error::shape(format!("{}: expected {} channels, got {}", self.name, self.channels, d.c)));
        }
        let groups = ops::channel_split4(&mut ctx.tape, x)?;
        let mut feats = Vec::with_capacity(4);
        for (i, &g) in groups.iter().enumerate() {
            let u = match BRANCH_POOL[i] {
                Some(1) => g,
                Some(win) => ops::avgpool2d(&mut ctx.tape, g, win)?,
                None => ops::adaptive_gap(&mut ctx.tape, g)?,
            };
            let s = ctx.nilif(u, &self.neuron, &self.spike_label(i + 1))?;
            let f = self.branch[i].forward(ctx, s)?;
            let fd = ctx.value(f).dims5()?;
            let f = if (fd.h, fd.w) == (d.h, d.w) {
                f
            } else {
                ops::upsample_nearest(&mut ctx.tape, f, d.h, d.w)?
            };
            feats.push(f);
        }
        let mut z = Vec::with_capacity(4);
        let t1 = ctx.param(self.theta[0]);
        z.push(ops::mul_bcast(&mut ctx.tape, feats[0], t1)?);
        for j in 0..3 {
            let pair = ops::channel_concat(&mut ctx.tape, &[feats[0], feats[j + 1]])?;
            let m = self.mix[j].forward(ctx, pair)?;
            let th = ctx.param(self.theta[j + 1]);
            z.push(ops::mul_bcast(&mut ctx.tape, m, th)?);
        }
        let z = ops::channel_concat(&mut ctx.tape, &z)?;
        self.fuse.forward(ctx, z)
    }
}
