//! Threshold-dependent batch normalisation.
//!
//! Statistics are taken per channel over the merged `T·B·H·W` population
//! and the normalised activations are rescaled to `α_bn·v_th` before the
//! learned per-channel affine map, so pre-spike currents sit at the firing
//! threshold's scale.

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Dims5, Tensor};

pub const BN_EPS: f32 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdBnConfig {
    /// `α_bn · v_th`, the standard deviation normalised activations get.
    pub target_std: f32,
    pub momentum: f32,
    pub eps: f32,
}

impl TdBnConfig {
    pub fn new(alpha_bn: f32, v_th: f32) -> Self {
        Self {
            target_std: alpha_bn * v_th,
            momentum: 0.1,
            eps: BN_EPS,
        }
    }
}

/// Running statistics updated in training mode.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

fn channel_moments(x: &[f32], d: Dims5) -> (Vec<f64>, Vec<f64>) {
    let hw = d.plane();
    let mut sum = vec![0.0f64; d.c];
    let mut sq = vec![0.0f64; d.c];
    for (p, plane) in x.chunks_exact(hw).enumerate() {
        let c = p % d.c;
        for &v in plane {
            sum[c] += v as f64;
        }
    }
    let count = (d.frames() * hw) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    for (p, plane) in x.chunks_exact(hw).enumerate() {
        let c = p % d.c;
        for &v in plane {
            let e = v as f64 - mean[c];
            sq[c] += e * e;
        }
    }
    let var = sq.iter().map(|s| s / count).collect();
    (mean, var)
}

struct TdBnOp {
    dims: Dims5,
    target: f32,
    /// Per-channel `1/√(var + ε)` of the statistics used in forward.
    inv_std: Vec<f32>,
    /// Normalised input `(x − mean)·inv_std`.
    xhat: Vec<f32>,
    training: bool,
}

impl BackwardOp for TdBnOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let d = self.dims;
        let hw = d.plane();
        let scale = inputs[1].data();
        let gd = g.data();
        let mut gscale = vec![0.0f64; d.c];
        let mut gshift = vec![0.0f64; d.c];
        for (p, (gp, xp)) in gd.chunks_exact(hw).zip(self.xhat.chunks_exact(hw)).enumerate() {
            let c = p % d.c;
            for (gv, xv) in gp.iter().zip(xp) {
                gshift[c] += *gv as f64;
                gscale[c] += (*gv * xv) as f64;
            }
        }
        let count = (d.frames() * hw) as f64;
        let gx = needs[0].then(|| {
            let mut gx = vec![0.0f32; gd.len()];
            for (p, ((gp, xp), out)) in gd
                .chunks_exact(hw)
                .zip(self.xhat.chunks_exact(hw))
                .zip(gx.chunks_exact_mut(hw))
                .enumerate()
            {
                let c = p % d.c;
                let k = self.target * scale[c];
                if self.training {
                    // dxhat = g·k; dx = inv_std·(dxhat − mean(dxhat) − xhat·mean(dxhat·xhat))
                    let m1 = (gshift[c] / count) as f32 * k;
                    let m2 = (gscale[c] / count) as f32 * k;
                    for ((o, gv), xv) in out.iter_mut().zip(gp).zip(xp) {
                        *o = self.inv_std[c] * (gv * k - m1 - xv * m2);
                    }
                } else {
                    for (o, gv) in out.iter_mut().zip(gp) {
                        *o = gv * k * self.inv_std[c];
                    }
                }
            }
            Tensor::from_vec5(d, gx).unwrap()
        });
        let to_tensor = |v: Vec<f64>, like: &Tensor, mul: f32| {
            Tensor::from_vec(like.shape().to_vec(), v.into_iter().map(|x| x as f32 * mul).collect()).unwrap()
        };
        vec![
            gx,
            needs[1].then(|| to_tensor(gscale, inputs[1], self.target)),
            needs[2].then(|| to_tensor(gshift, inputs[2], 1.0)),
        ]
    }
}

/// Applies tdBN with per-channel `scale` and `shift` (each `C` long).
///
/// In training mode the batch statistics normalise the input and update
/// `stats` by exponential moving average; in eval mode `stats` are used as is.
pub fn tdbn(
    tape: &mut Tape,
    x: Var,
    scale: Var,
    shift: Var,
    stats: &mut RunningStats,
    cfg: &TdBnConfig,
    training: bool,
) -> Result<Var> {
    let d = tape.value(x).dims5()?;
    if tape.value(scale).numel() != d.c || tape.value(shift).numel() != d.c || stats.mean.len() != d.c {
        return Err(Error::shape(format!("tdBN parameters do not match {} channels", d.c)));
    }
    let (mean, var): (Vec<f64>, Vec<f64>) = if training {
        let (m, v) = channel_moments(tape.value(x).data(), d);
        let n = (d.frames() * d.plane()) as f64;
        let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
        for c in 0..d.c {
            let mom = cfg.momentum;
            stats.mean[c] = (1.0 - mom) * stats.mean[c] + mom * m[c] as f32;
            stats.var[c] = (1.0 - mom) * stats.var[c] + mom * (v[c] * unbias) as f32;
        }
        (m, v)
    } else {
        (
            stats.mean.iter().map(|&v| v as f64).collect(),
            stats.var.iter().map(|&v| v as f64).collect(),
        )
    };
    let inv_std: Vec<f32> = var.iter().map(|&v| (1.0 / (v + cfg.eps as f64).sqrt()) as f32).collect();
    let hw = d.plane();
    let (sc, sh) = (tape.value(scale).data(), tape.value(shift).data());
    let xd = tape.value(x).data();
    let mut xhat = vec![0.0f32; xd.len()];
    let mut out = vec![0.0f32; xd.len()];
    for (p, ((xp, hp), op)) in xd
        .chunks_exact(hw)
        .zip(xhat.chunks_exact_mut(hw))
        .zip(out.chunks_exact_mut(hw))
        .enumerate()
    {
        let c = p % d.c;
        let (m, s) = (mean[c] as f32, inv_std[c]);
        let k = cfg.target_std * sc[c];
        for ((xv, hv), ov) in xp.iter().zip(hp.iter_mut()).zip(op.iter_mut()) {
            *hv = (xv - m) * s;
            *ov = *hv * k + sh[c];
        }
    }
    let out = Tensor::from_vec5(d, out)?;
    Ok(tape.push(
        out,
        vec![x, scale, shift],
        Box::new(TdBnOp {
            dims: d,
            target: cfg.target_std,
            inv_std,
            xhat,
            training,
        }),
    ))
}
