//! 2-D cross-correlation applied independently to every `(t, b)` frame,
//! lowered to im2col + SGEMM.

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Dims5, Tensor};

#[derive(Clone, Copy, Debug)]
struct Geometry {
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    fn col_rows(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn col_cols(&self) -> usize {
        self.ho * self.wo
    }
}

/// Output spatial size of a convolution, or a shape error when it would be
/// non-positive.
pub fn conv_output_size(size: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = size + 2 * pad;
    if stride == 0 || padded < k {
        return Err(Error::shape(format!(
            "convolution of size {size} with kernel {k}, stride {stride}, pad {pad} has no output"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Output columns `ox` whose input column `ox·s + kx − p` lies inside `0..w`.
fn valid_range(kx: usize, g: &Geometry) -> (usize, usize) {
    let (s, p) = (g.stride as isize, g.pad as isize);
    let lo = (p - kx as isize).max(0);
    let hi = g.w as isize + p - kx as isize;
    let first = ((lo + s - 1) / s) as usize;
    let end = if hi <= 0 { 0 } else { ((hi + s - 1) / s) as usize };
    (first.min(g.wo), end.min(g.wo).max(first.min(g.wo)))
}

fn im2col(x: &[f32], g: &Geometry, col: &mut [f32]) {
    let (k, s, p) = (g.k, g.stride, g.pad as isize);
    let n = g.col_cols();
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let (x0, x1) = valid_range(kx, g);
                let row = &mut col[((ci * k + ky) * k + kx) * n..][..n];
                for oy in 0..g.ho {
                    let iy = (oy * s + ky) as isize - p;
                    let dst = &mut row[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    dst[..x0].fill(0.0);
                    dst[x1..].fill(0.0);
                    if x0 == x1 {
                        continue;
                    }
                    let start = (x0 * s + kx) as isize - p;
                    if s == 1 {
                        dst[x0..x1].copy_from_slice(&src[start as usize..start as usize + (x1 - x0)]);
                    } else {
                        for (j, d) in dst[x0..x1].iter_mut().enumerate() {
                            *d = src[start as usize + j * s];
                        }
                    }
                }
            }
        }
    }
}

fn col2im(col: &[f32], g: &Geometry, x: &mut [f32]) {
    let (k, s, p) = (g.k, g.stride, g.pad as isize);
    let n = g.col_cols();
    for ci in 0..g.cin {
        let plane = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..k {
            for kx in 0..k {
                let (x0, x1) = valid_range(kx, g);
                let row = &col[((ci * k + ky) * k + kx) * n..][..n];
                for oy in 0..g.ho {
                    let iy = (oy * s + ky) as isize - p;
                    if x0 == x1 || iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let start = ((x0 * s + kx) as isize - p) as usize;
                    let srow = &row[oy * g.wo + x0..oy * g.wo + x1];
                    if s == 1 {
                        for (d, v) in dst[start..start + srow.len()].iter_mut().zip(srow) {
                            *d += v;
                        }
                    } else {
                        for (j, v) in srow.iter().enumerate() {
                            dst[start + j * s] += v;
                        }
                    }
                }
            }
        }
    }
}

/// `c[m×n] = alpha·a·b + beta·c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: every index touched is bounded by the slice lengths, checked
    // below for the last element reached through each stride pair.
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

struct Conv2dOp {
    geo: Geometry,
    frames: usize,
}

impl BackwardOp for Conv2dOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let geo = self.geo;
        let (x, w) = (inputs[0].data(), inputs[1].data());
        let (kk, n) = (geo.col_rows(), geo.col_cols());
        let in_frame = geo.cin * geo.h * geo.w;
        let out_frame = geo.cout * n;
        let mut gx = needs[0].then(|| vec![0.0f32; x.len()]);
        let mut gw = needs[1].then(|| vec![0.0f32; w.len()]);
        let mut col = vec![0.0f32; if geo.is_pointwise() { 0 } else { kk * n }];
        let mut dcol = vec![0.0f32; if geo.is_pointwise() { 0 } else { kk * n }];
        for f in 0..self.frames {
            let gy = &g.data()[f * out_frame..(f + 1) * out_frame];
            let xf = &x[f * in_frame..(f + 1) * in_frame];
            if let Some(gw) = gw.as_mut() {
                let colf: &[f32] = if geo.is_pointwise() {
                    xf
                } else {
                    im2col(xf, &geo, &mut col);
                    &col
                };
                // gW[cout×kk] += gY[cout×n] · colᵀ[n×kk]
                gemm(geo.cout, n, kk, gy, (n, 1), colf, (1, n), 1.0, gw);
            }
            if let Some(gx) = gx.as_mut() {
                let gxf = &mut gx[f * in_frame..(f + 1) * in_frame];
                // dcol[kk×n] = Wᵀ[kk×cout] · gY[cout×n]
                if geo.is_pointwise() {
                    gemm(kk, geo.cout, n, w, (1, kk), gy, (n, 1), 0.0, gxf);
                } else {
                    gemm(kk, geo.cout, n, w, (1, kk), gy, (n, 1), 0.0, &mut dcol);
                    col2im(&dcol, &geo, gxf);
                }
            }
        }
        vec![
            gx.map(|d| Tensor::from_vec(inputs[0].shape().to_vec(), d).unwrap()),
            gw.map(|d| Tensor::from_vec(inputs[1].shape().to_vec(), d).unwrap()),
        ]
    }
}

/// Cross-correlation of `x` (`T×B×Cin×H×W`) with `kernel` (`Cout×Cin×k×k`).
pub fn conv2d(tape: &mut Tape, x: Var, kernel: Var, stride: usize, pad: usize) -> Result<Var> {
    let d = tape.value(x).dims5()?;
    let (cout, cin, k) = match tape.value(kernel).shape() {
        &[co, ci, kh, kw] if kh == kw => (co, ci, kh),
        s => return Err(Error::shape(format!("conv kernel must be Cout×Cin×k×k, got {s:?}"))),
    };
    if cin != d.c {
        return Err(Error::shape(format!(
            "conv expects {cin} input channels, tensor {d} has {}",
            d.c
        )));
    }
    if stride == 0 {
        return Err(Error::param("conv stride must be at least 1"));
    }
    let ho = conv_output_size(d.h, k, stride, pad)?;
    let wo = conv_output_size(d.w, k, stride, pad)?;
    let geo = Geometry {
        cin,
        cout,
        k,
        stride,
        pad,
        h: d.h,
        w: d.w,
        ho,
        wo,
    };
    let out = conv_forward(tape.value(x).data(), tape.value(kernel).data(), &geo, d.frames());
    let out = Tensor::from_vec5(Dims5::new(d.t, d.b, cout, ho, wo), out)?;
    Ok(tape.push(
        out,
        vec![x, kernel],
        Box::new(Conv2dOp {
            geo,
            frames: d.frames(),
        }),
    ))
}

fn conv_forward(x: &[f32], w: &[f32], geo: &Geometry, frames: usize) -> Vec<f32> {
    let (kk, n) = (geo.col_rows(), geo.col_cols());
    let in_frame = geo.cin * geo.h * geo.w;
    let out_frame = geo.cout * n;
    let mut out = vec![0.0f32; frames * out_frame];
    let mut col = vec![0.0f32; if geo.is_pointwise() { 0 } else { kk * n }];
    for f in 0..frames {
        let xf = &x[f * in_frame..(f + 1) * in_frame];
        let colf: &[f32] = if geo.is_pointwise() {
            xf
        } else {
            im2col(xf, geo, &mut col);
            &col
        };
        gemm(
            geo.cout,
            kk,
            n,
            w,
            (kk, 1),
            colf,
            (n, 1),
            0.0,
            &mut out[f * out_frame..(f + 1) * out_frame],
        );
    }
    out
}
