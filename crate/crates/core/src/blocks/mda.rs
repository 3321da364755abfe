//! Multi-dimensional attention: temporal, channel and spatial gates applied
//! one after another.
//!
//! The temporal and channel gates squeeze the input by averaging over every
//! other axis and run a bottleneck MLP (ratio 4, ReLU) followed by a logistic.
//! The spatial gate averages over channels and applies a 7×7 convolution and
//! a logistic. Gates are not billed by the energy proxy.

use rand::Rng;

use super::BlockEnv;
use crate::autograd::{ParamId, ParamStore, Var};
use crate::error::{Error, Result};
use crate::layers::{Ctx, Linear};
use crate::ops;
use crate::tensor::Tensor;

pub const SPATIAL_KERNEL: usize = 7;
const REDUCTION: usize = 4;
/// Bottleneck units start active so no gate weight is dead at init.
const HIDDEN_BIAS: f32 = 0.1;

#[derive(Clone, Debug)]
pub struct Gate {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Gate {
    fn new(store: &mut ParamStore, name: &str, n: usize, rng: &mut impl Rng) -> Self {
        let hidden = (n / REDUCTION).max(1);
        let fc1 = Linear::new(store, &format!("{name}.fc1"), n, hidden, rng);
        store.value_mut(fc1.bias).fill(HIDDEN_BIAS);
        Self {
            fc1,
            fc2: Linear::new(store, &format!("{name}.fc2"), hidden, n, rng),
        }
    }

    fn num_params(&self) -> usize {
        self.fc1.num_params() + self.fc2.num_params()
    }

    /// Logistic gate values for a `1 × n` squeeze vector.
    fn forward(&self, ctx: &mut Ctx, v: Var) -> Result<Var> {
        let h = self.fc1.forward(ctx, v)?;
        let h = ops::relu(&mut ctx.tape, h);
        let o = self.fc2.forward(ctx, h)?;
        Ok(ops::sigmoid(&mut ctx.tape, o))
    }
}

#[derive(Clone, Debug)]
pub struct Mda {
    pub name: String,
    pub timesteps: usize,
    pub channels: usize,
    pub temporal: Gate,
    pub channel: Gate,
    pub spatial_weight: ParamId,
    pub spatial_bias: ParamId,
}

impl Mda {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, env: &BlockEnv, rng: &mut impl Rng) -> Self {
        let k = SPATIAL_KERNEL;
        let bound = (1.0 / (k * k) as f32).sqrt();
        let w = (0..k * k).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self {
            name: name.to_string(),
            timesteps: env.timesteps,
            channels: c,
            temporal: Gate::new(store, &format!("{name}.temporal"), env.timesteps, rng),
            channel: Gate::new(store, &format!("{name}.channel"), c, rng),
            spatial_weight: store.add(
                format!("{name}.spatial.weight"),
                Tensor::from_vec(vec![1, 1, k, k], w).unwrap(),
                true,
            ),
            spatial_bias: store.add(format!("{name}.spatial.bias"), Tensor::zeros(&[1, 1, 1, 1, 1]), true),
        }
    }

    pub fn num_params(&self) -> usize {
        self.temporal.num_params() + self.channel.num_params() + SPATIAL_KERNEL * SPATIAL_KERNEL + 1
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let d = ctx.value(x).dims5()?;
        if d.t != self.timesteps || d.c != self.channels {
            return Err(Error::shape(format!(
                "{}: built for T={} C={}, got {d}",
                self.name, self.timesteps, self.channels
            )));
        }
        let tape = &mut ctx.tape;
        let sq = ops::mean_axes(tape, x, [false, true, true, true, true])?;
        let sq = ops::reshape(tape, sq, &[1, d.t])?;
        let g = self.temporal.forward(ctx, sq)?;
        let g = ops::reshape(&mut ctx.tape, g, &[d.t, 1, 1, 1, 1])?;
        let x = ops::mul_bcast(&mut ctx.tape, x, g)?;

        let sq = ops::mean_axes(&mut ctx.tape, x, [true, true, false, true, true])?;
        let sq = ops::reshape(&mut ctx.tape, sq, &[1, d.c])?;
        let g = self.channel.forward(ctx, sq)?;
        let g = ops::reshape(&mut ctx.tape, g, &[1, 1, d.c, 1, 1])?;
        let x = ops::mul_bcast(&mut ctx.tape, x, g)?;

        let map = ops::mean_axes(&mut ctx.tape, x, [false, false, true, false, false])?;
        let (w, b) = (ctx.param(self.spatial_weight), ctx.param(self.spatial_bias));
        let a = ops::conv2d(&mut ctx.tape, map, w, 1, SPATIAL_KERNEL / 2)?;
        let a = ops::add_bcast(&mut ctx.tape, a, b)?;
        let g = ops::sigmoid(&mut ctx.tape, a);
        ops::mul_bcast(&mut ctx.tape, x, g)
    }
}
