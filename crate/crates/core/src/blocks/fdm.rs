//! Frequency decomposition: an indicator LIF splits the input into a spiking
//! low-frequency part and its residual, recombined with learned weights.

use super::BlockEnv;
use crate::autograd::{ParamId, ParamStore, Var};
use crate::error::Result;
use crate::layers::Ctx;
use crate::ops;
use crate::spiking::NeuronConfig;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Fdm {
    pub name: String,
    pub alpha_l: ParamId,
    pub alpha_h: ParamId,
    pub neuron: NeuronConfig,
}

impl Fdm {
    pub fn new(store: &mut ParamStore, name: &str, env: &BlockEnv) -> Self {
        let one = || Tensor::full(&[1, 1, 1, 1, 1], 1.0);
        Self {
            name: name.to_string(),
            alpha_l: store.add(format!("{name}.alpha_l"), one(), true),
            alpha_h: store.add(format!("{name}.alpha_h"), one(), true),
            neuron: env.neuron,
        }
    }

    pub fn num_params(&self) -> usize {
        2
    }

    /// `α_l·X_l + α_h·X_h + X ⊙ X_l` with `X_l = LIF(X)`, `X_h = X − X_l`.
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let xl = ctx.binary_lif(x, &self.neuron, &format!("{}.lif", self.name))?;
        let xh = ops::sub(&mut ctx.tape, x, xl)?;
        let (al, ah) = (ctx.param(self.alpha_l), ctx.param(self.alpha_h));
        let low = ops::mul_bcast(&mut ctx.tape, xl, al)?;
        let high = ops::mul_bcast(&mut ctx.tape, xh, ah)?;
        let gated = ops::mul(&mut ctx.tape, x, xl)?;
        let y = ops::add(&mut ctx.tape, low, high)?;
        ops::add(&mut ctx.tape, y, gated)
    }
}
