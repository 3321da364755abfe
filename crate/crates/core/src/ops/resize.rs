//! Bilinear resampling with half-pixel centres (align-corners = false).

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Dims5, Tensor};

#[derive(Clone, Copy, Debug)]
struct Tap {
    i0: usize,
    i1: usize,
    w1: f32,
}

fn taps(src: usize, dst: usize) -> Vec<Tap> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (pos.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            let w1 = if i1 == i0 { 0.0 } else { (pos - i0 as f64) as f32 };
            Tap { i0, i1, w1 }
        })
        .collect()
}

struct ResizeOp {
    input: Dims5,
    rows: Vec<Tap>,
    cols: Vec<Tap>,
}

impl BackwardOp for ResizeOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let d = self.input;
        let (oh, ow) = (self.rows.len(), self.cols.len());
        let mut gx = vec![0.0f32; d.numel()];
        for (p, go) in g.data().chunks_exact(oh * ow).enumerate() {
            let dst = &mut gx[p * d.plane()..(p + 1) * d.plane()];
            for (i, r) in self.rows.iter().enumerate() {
                for (j, c) in self.cols.iter().enumerate() {
                    let v = go[i * ow + j];
                    let (a0, a1) = ((1.0 - r.w1) * v, r.w1 * v);
                    dst[r.i0 * d.w + c.i0] += a0 * (1.0 - c.w1);
                    dst[r.i0 * d.w + c.i1] += a0 * c.w1;
                    dst[r.i1 * d.w + c.i0] += a1 * (1.0 - c.w1);
                    dst[r.i1 * d.w + c.i1] += a1 * c.w1;
                }
            }
        }
        vec![Some(Tensor::from_vec5(d, gx).unwrap())]
    }
}

/// Bilinear resize of every plane to `oh × ow`.
pub fn resize_bilinear(tape: &mut Tape, x: Var, oh: usize, ow: usize) -> Result<Var> {
    let out = resize_bilinear_tensor(tape.value(x), oh, ow)?;
    let d = tape.value(x).dims5()?;
    if (oh, ow) == (d.h, d.w) {
        // identical geometry: keep the node but skip the sampling arithmetic
        return Ok(tape.push(out, vec![x], Box::new(IdentityOp)));
    }
    Ok(tape.push(
        out,
        vec![x],
        Box::new(ResizeOp {
            input: d,
            rows: taps(d.h, oh),
            cols: taps(d.w, ow),
        }),
    ))
}

struct IdentityOp;
impl BackwardOp for IdentityOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        vec![Some(g.clone())]
    }
}

/// Tape-free bilinear resize, used for targets and image pyramids.
pub fn resize_bilinear_tensor(x: &Tensor, oh: usize, ow: usize) -> Result<Tensor> {
    if oh == 0 || ow == 0 {
        return Err(Error::param("resize target dimensions must be positive"));
    }
    let d = x.dims5()?;
    if (oh, ow) == (d.h, d.w) {
        return Ok(x.clone());
    }
    let rows = taps(d.h, oh);
    let cols = taps(d.w, ow);
    let mut out = Vec::with_capacity(d.frames() * d.c * oh * ow);
    for src in x.data().chunks_exact(d.plane()) {
        for r in &rows {
            let (r0, r1) = (&src[r.i0 * d.w..][..d.w], &src[r.i1 * d.w..][..d.w]);
            for c in &cols {
                let top = r0[c.i0] * (1.0 - c.w1) + r0[c.i1] * c.w1;
                let bot = r1[c.i0] * (1.0 - c.w1) + r1[c.i1] * c.w1;
                out.push(top * (1.0 - r.w1) + bot * r.w1);
            }
        }
    }
    Tensor::from_vec5(d.with_hw(oh, ow), out)
}
