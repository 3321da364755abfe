//! Multi-scale training objective and image-quality metrics.
//!
//! Each of the three predictions is compared with the ground truth resized
//! (bilinear) to its resolution. Per scale the objective has three terms,
//! each a mean so that the weights do not depend on the patch size:
//!
//! * pixel: mean absolute error;
//! * SSIM: `1 − SSIM`;
//! * FFT: mean modulus of the difference of the unnormalised 2-D DFTs.
//!
//! Terms are summed over scales and combined as
//! `λ_pix·L_pix + λ_ssim·L_ssim + λ_fft·L_fft`.

mod ssim;

pub use ssim::{gaussian_taps, ssim_loss, ssim_metric, window_size, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::network::MultiScale;
use crate::ops;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_pix: f32,
    pub lambda_ssim: f32,
    pub lambda_fft: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_pix: 0.5,
            lambda_ssim: 1.0,
            lambda_fft: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_pix", self.lambda_pix), ("lambda_ssim", self.lambda_ssim), ("lambda_fft", self.lambda_fft)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Scalar values of every term. Per-scale arrays are ordered full, half, quarter.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub pix: [f64; 3],
    pub ssim: [f64; 3],
    pub fft: [f64; 3],
    pub l_pix: f64,
    pub l_ssim: f64,
    pub l_fft: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn finish(pix: [f64; 3], ssim: [f64; 3], fft: [f64; 3], w: &LossWeights) -> Self {
        let (l_pix, l_ssim, l_fft) = (pix.iter().sum(), ssim.iter().sum(), fft.iter().sum());
        Self {
            pix,
            ssim,
            fft,
            l_pix,
            l_ssim,
            l_fft,
            total: w.lambda_pix as f64 * l_pix + w.lambda_ssim as f64 * l_ssim + w.lambda_fft as f64 * l_fft,
        }
    }
}

/// Ground truth at full, half and quarter resolution.
pub fn target_pyramid(gt: &Tensor) -> Result<MultiScale<Tensor>> {
    let d = gt.dims5()?;
    Ok(MultiScale {
        full: gt.clone(),
        half: ops::resize_bilinear_tensor(gt, d.h / 2, d.w / 2)?,
        quarter: ops::resize_bilinear_tensor(gt, d.h / 4, d.w / 4)?,
    })
}

/// Resizes `pred` to the target's size when they differ.
fn match_size(tape: &mut Tape, pred: Var, target: &Tensor) -> Result<Var> {
    let (p, t) = (tape.value(pred).dims5()?, target.dims5()?);
    if (p.t, p.b, p.c) != (t.t, t.b, t.c) {
        return Err(Error::shape(format!("prediction {p} does not match target {t}")));
    }
    if (p.h, p.w) == (t.h, t.w) {
        Ok(pred)
    } else {
        ops::resize_bilinear(tape, pred, t.h, t.w)
    }
}

pub fn pix_term(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let diff = ops::sub(tape, pred, target)?;
    Ok(ops::mean_abs(tape, diff))
}

pub fn fft_term(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let diff = ops::sub(tape, pred, target)?;
    let spec = ops::fft2(tape, diff)?;
    let mag = ops::spectrum_magnitude(tape, spec)?;
    Ok(ops::mean_abs(tape, mag))
}

/// Records the full objective; returns the total node and its breakdown.
pub fn objective(
    tape: &mut Tape,
    preds: &MultiScale<Var>,
    targets: &MultiScale<Tensor>,
    w: &LossWeights,
) -> Result<(Var, LossBreakdown)> {
    let mut terms = Vec::with_capacity(9);
    let (mut pix, mut ssim, mut fft) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    for (s, (&pred, target)) in preds.as_array().into_iter().zip(targets.as_array()).enumerate() {
        let p = match_size(tape, pred, target)?;
        let t = tape.constant(target.clone());
        let lp = pix_term(tape, p, t)?;
        let ls = ssim_loss(tape, p, t)?;
        let lf = fft_term(tape, p, t)?;
        pix[s] = tape.value(lp).data()[0] as f64;
        ssim[s] = tape.value(ls).data()[0] as f64;
        fft[s] = tape.value(lf).data()[0] as f64;
        terms.push(ops::scale(tape, lp, w.lambda_pix));
        terms.push(ops::scale(tape, ls, w.lambda_ssim));
        terms.push(ops::scale(tape, lf, w.lambda_fft));
    }
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = ops::add(tape, total, t)?;
    }
    Ok((total, LossBreakdown::finish(pix, ssim, fft, w)))
}

/// Tape-free evaluation of the objective.
pub fn evaluate(preds: &MultiScale<Tensor>, gt: &Tensor, w: &LossWeights) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let vars = MultiScale {
        full: tape.constant(preds.full.clone()),
        half: tape.constant(preds.half.clone()),
        quarter: tape.constant(preds.quarter.clone()),
    };
    Ok(objective(&mut tape, &vars, &target_pyramid(gt)?, w)?.1)
}

/// Peak signal-to-noise ratio in dB; `+∞` for identical inputs.
pub fn psnr(a: &Tensor, b: &Tensor, peak: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("PSNR inputs differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let se: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    let mse = se / a.numel() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, f: impl Fn(usize) -> f32) -> Tensor {
        Tensor::from_vec(vec![1, 1, 3, h, w], (0..3 * h * w).map(f).collect()).unwrap()
    }

    #[test]
    fn psnr_values() {
        let a = img(4, 4, |_| 0.5);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = img(4, 4, |_| 0.6);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-5);
        let c = img(4, 4, |_| 0.55);
        let gain = psnr(&a, &c, 1.0).unwrap() - psnr(&a, &b, 1.0).unwrap();
        assert!((gain - 6.0206).abs() < 1e-3);
    }

    #[test]
    fn identical_predictions_cost_nothing() {
        let gt = img(16, 16, |i| ((i * 37) % 11) as f32 / 11.0);
        let preds = target_pyramid(&gt).unwrap();
        let b = evaluate(&preds, &gt, &LossWeights::default()).unwrap();
        assert!(b.l_pix == 0.0 && b.l_fft == 0.0);
        assert!(b.total.abs() < 1e-6);
    }

    #[test]
    fn offset_at_full_scale() {
        let gt = img(8, 8, |i| (i % 5) as f32 / 5.0);
        let mut preds = target_pyramid(&gt).unwrap();
        preds.full = preds.full.map(|v| v + 0.25);
        let b = evaluate(&preds, &gt, &LossWeights::default()).unwrap();
        assert!((b.pix[0] - 0.25).abs() < 1e-6);
        assert!((b.fft[0] - 0.25).abs() < 1e-5);
        assert_eq!(b.pix[1], 0.0);
        let w = LossWeights::default();
        let expect = w.lambda_pix as f64 * b.l_pix + w.lambda_ssim as f64 * b.l_ssim + w.lambda_fft as f64 * b.l_fft;
        assert!((b.total - expect).abs() < 1e-12);
    }

    #[test]
    fn weights_validated() {
        let mut w = LossWeights::default();
        assert!(w.validate().is_ok());
        w.lambda_fft = -1.0;
        assert!(w.validate().is_err());
    }
}
