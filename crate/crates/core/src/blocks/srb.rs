//! Spiking residual block.
//!
//! ```text
//! x̃ = FDM(x)
//! z = tdBN(conv3(MPLB(tdBN(conv3(x̃)))))
//! y = MDA(z + tdBN(conv1(x))) + x
//! ```
//!
//! Disabled components are skipped; with everything off the block is a
//! conv/tdBN pair with a projected shortcut and the outer residual.

use rand::Rng;

use super::{BlockEnv, Fdm, Mda, Mplb, Toggles};
use crate::autograd::{ParamStore, Var};
use crate::energy::LayerKind;
use crate::error::Result;
use crate::layers::{ConvBn, Ctx};
use crate::ops;

#[derive(Clone, Debug)]
pub struct Srb {
    pub name: String,
    pub toggles: Toggles,
    pub fdm: Option<Fdm>,
    pub entry: ConvBn,
    pub mplb: Option<Mplb>,
    pub exit: ConvBn,
    pub shortcut: ConvBn,
    pub mda: Option<Mda>,
}

impl Srb {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c: usize,
        toggles: Toggles,
        env: &BlockEnv,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let spike = LayerKind::SpikeDriven;
        let fdm = toggles.fdm.then(|| Fdm::new(store, &format!("{name}.fdm"), env));
        let entry = ConvBn::new(store, &format!("{name}.entry"), c, c, 3, 1, spike, env.bn, rng);
        let mplb = if toggles.mplb {
            Some(Mplb::new(store, &format!("{name}.mplb"), c, env, rng)?)
        } else {
            None
        };
        let exit = ConvBn::new(store, &format!("{name}.exit"), c, c, 3, 1, spike, env.bn, rng);
        let shortcut = ConvBn::new(store, &format!("{name}.shortcut"), c, c, 1, 1, spike, env.bn, rng);
        let mda = toggles.mda.then(|| Mda::new(store, &format!("{name}.mda"), c, env, rng));
        Ok(Self {
            name: name.to_string(),
            toggles,
            fdm,
            entry,
            mplb,
            exit,
            shortcut,
            mda,
        })
    }

    pub fn num_params(&self) -> usize {
        self.fdm.as_ref().map_or(0, Fdm::num_params)
            + self.entry.num_params()
            + self.mplb.as_ref().map_or(0, Mplb::num_params)
            + self.exit.num_params()
            + self.shortcut.num_params()
            + self.mda.as_ref().map_or(0, Mda::num_params)
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let xt = match &self.fdm {
            Some(f) => f.forward(ctx, x)?,
            None => x,
        };
        let a = self.entry.forward(ctx, xt)?;
        let m = match &self.mplb {
            Some(p) => p.forward(ctx, a)?,
            None => a,
        };
        let z = self.exit.forward(ctx, m)?;
        let sc = self.shortcut.forward(ctx, x)?;
        let s = ops::add(&mut ctx.tape, z, sc)?;
        let r = match &self.mda {
            Some(att) => att.forward(ctx, s)?,
            None => s,
        };
        ops::add(&mut ctx.tape, r, x)
    }
}
