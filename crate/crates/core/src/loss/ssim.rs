//! Structural similarity with an 11×11 Gaussian window (σ = 1.5), evaluated
//! on the valid region of every plane. Smaller planes use the largest odd
//! window that fits.
//!
//! The loss term is a single tape op with an analytic gradient: with local
//! moments `μx, μy, Exx = Σg·x², Exy = Σg·x·y` the map value
//!
//! ```text
//! S = (2μxμy + C1)(2(Exy − μxμy) + C2) / ((μx² + μy² + C1)(Exx − μx² + σy² + C2))
//! ```
//!
//! is differentiated through those moments and the window is scattered back.

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Window side used for an `h × w` plane.
pub fn window_size(h: usize, w: usize) -> usize {
    let m = h.min(w).min(SSIM_WINDOW);
    if m.is_multiple_of(2) {
        m - 1
    } else {
        m
    }
}

/// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize) -> Vec<f64> {
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Valid separable filtering of an `h × w` plane.
fn filter(x: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for j in 0..ow {
            rows[y * ow + j] = (0..k).map(|i| g[i] * x[y * w + j + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..k).map(|t| g[t] * rows[(i + t) * ow + j]).sum();
        }
    }
    out
}

/// Adjoint of [`filter`]: scatters an `oh × ow` map back onto `h × w`.
fn filter_adjoint(m: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for i in 0..oh {
        for t in 0..k {
            for j in 0..ow {
                rows[(i + t) * ow + j] += g[t] * m[i * ow + j];
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for j in 0..ow {
            let v = rows[y * ow + j];
            for i in 0..k {
                out[y * w + j + i] += g[i] * v;
            }
        }
    }
    out
}

struct PlaneStats {
    mean_ssim: f64,
    /// `∂ mean(S) / ∂x` over the plane.
    grad: Option<Vec<f64>>,
}

fn plane_ssim(x: &[f32], y: &[f32], h: usize, w: usize, want_grad: bool) -> PlaneStats {
    let g = gaussian_taps(window_size(h, w));
    let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let ys: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a * b).collect();
    let (mx, my) = (filter(&xs, h, w, &g), filter(&ys, h, w, &g));
    let (exx, eyy, exy) = (filter(&xx, h, w, &g), filter(&yy, h, w, &g), filter(&xy, h, w, &g));
    let n = mx.len();
    let mut total = 0.0;
    let (mut da, mut db, mut dc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for p in 0..n {
        let (ux, uy) = (mx[p], my[p]);
        let a1 = 2.0 * ux * uy + SSIM_C1;
        let a2 = 2.0 * (exy[p] - ux * uy) + SSIM_C2;
        let b1 = ux * ux + uy * uy + SSIM_C1;
        let b2 = (exx[p] - ux * ux) + (eyy[p] - uy * uy) + SSIM_C2;
        let s = a1 * a2 / (b1 * b2);
        total += s;
        if want_grad {
            let inv = 1.0 / (n as f64);
            let d_mu = (2.0 * uy * a2 - 2.0 * uy * a1) / (b1 * b2) - s * (2.0 * ux / b1 - 2.0 * ux / b2);
            da[p] = d_mu * inv;
            db[p] = -s / b2 * inv;
            dc[p] = 2.0 * a1 / (b1 * b2) * inv;
        }
    }
    let grad = want_grad.then(|| {
        let ga = filter_adjoint(&da, h, w, &g);
        let gb = filter_adjoint(&db, h, w, &g);
        let gc = filter_adjoint(&dc, h, w, &g);
        (0..h * w).map(|q| ga[q] + 2.0 * xs[q] * gb[q] + ys[q] * gc[q]).collect()
    });
    PlaneStats {
        mean_ssim: total / n as f64,
        grad,
    }
}

fn check_pair(a: &Tensor, b: &Tensor) -> Result<crate::tensor::Dims5> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("SSIM inputs differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    a.dims5()
}

/// Mean SSIM over every plane of two same-shaped rank-5 tensors.
pub fn ssim_metric(a: &Tensor, b: &Tensor) -> Result<f64> {
    let d = check_pair(a, b)?;
    let hw = d.plane();
    let planes = a.data().chunks_exact(hw).zip(b.data().chunks_exact(hw));
    let sum: f64 = planes.map(|(x, y)| plane_ssim(x, y, d.h, d.w, false).mean_ssim).sum();
    Ok(sum / (d.frames() * d.c) as f64)
}

struct SsimLossOp {
    grad: Vec<f32>,
}

impl BackwardOp for SsimLossOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let k = g.data()[0];
        let gx = Tensor::from_vec(inputs[0].shape().to_vec(), self.grad.iter().map(|v| v * k).collect()).unwrap();
        vec![Some(gx), None]
    }
}

/// `1 − SSIM(pred, target)` as a scalar node; `target` is treated as constant.
pub fn ssim_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let (a, b) = (tape.value(pred), tape.value(target));
    let d = check_pair(a, b)?;
    let hw = d.plane();
    let planes = (d.frames() * d.c) as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(a.numel());
    for (x, y) in a.data().chunks_exact(hw).zip(b.data().chunks_exact(hw)) {
        let st = plane_ssim(x, y, d.h, d.w, true);
        sum += st.mean_ssim;
        grad.extend(st.grad.unwrap().into_iter().map(|v| (-v / planes) as f32));
    }
    let loss = 1.0 - sum / planes;
    Ok(tape.push(Tensor::scalar(loss as f32), vec![pred, target], Box::new(SsimLossOp { grad })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_shrinks() {
        assert_eq!(window_size(64, 64), 11);
        assert_eq!(window_size(16, 10), 9);
        assert_eq!(window_size(4, 4), 3);
        assert_eq!(window_size(1, 5), 1);
    }

    #[test]
    fn taps_normalised_and_symmetric() {
        let g = gaussian_taps(11);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(g[0], g[10]);
    }

    #[test]
    fn adjoint_identity() {
        let (h, w) = (7, 9);
        let g = gaussian_taps(3);
        let x: Vec<f64> = (0..h * w).map(|i| (i as f64 * 0.37).sin()).collect();
        let m: Vec<f64> = (0..(h - 2) * (w - 2)).map(|i| (i as f64 * 0.11).cos()).collect();
        let lhs: f64 = filter(&x, h, w, &g).iter().zip(&m).map(|(a, b)| a * b).sum();
        let rhs: f64 = filter_adjoint(&m, h, w, &g).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_is_one() {
        let t = Tensor::from_vec(vec![1, 1, 1, 12, 12], (0..144).map(|i| (i % 7) as f32 / 7.0).collect()).unwrap();
        assert!((ssim_metric(&t, &t).unwrap() - 1.0).abs() < 1e-12);
    }
}
