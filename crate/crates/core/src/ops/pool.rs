//! Average pooling, global average pooling and nearest-neighbour upsampling.

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Dims5, Tensor};

/// Mirror index into `0..n` without repeating the edge sample.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Source row/column for each position of the reflect-padded extent.
fn padded_map(n: usize, window: usize) -> Vec<usize> {
    let out = n.div_ceil(window);
    (0..out * window).map(|i| reflect_index(i as isize, n)).collect()
}

struct AvgPoolOp {
    input: Dims5,
    window: usize,
}

impl BackwardOp for AvgPoolOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], out: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let d = self.input;
        let od = out.dims5().unwrap();
        let rows = padded_map(d.h, self.window);
        let cols = padded_map(d.w, self.window);
        let inv = 1.0 / (self.window * self.window) as f32;
        let mut gx = vec![0.0f32; d.numel()];
        let gd = g.data();
        for p in 0..d.frames() * d.c {
            let src = &mut gx[p * d.plane()..(p + 1) * d.plane()];
            let go = &gd[p * od.plane()..(p + 1) * od.plane()];
            for (py, &sy) in rows.iter().enumerate() {
                for (px, &sx) in cols.iter().enumerate() {
                    src[sy * d.w + sx] += go[(py / self.window) * od.w + px / self.window] * inv;
                }
            }
        }
        vec![Some(Tensor::from_vec5(d, gx).unwrap())]
    }
}

/// Non-overlapping `window × window` mean pooling. Sides that do not divide
/// evenly are reflect-padded up to the next multiple first.
pub fn avgpool2d(tape: &mut Tape, x: Var, window: usize) -> Result<Var> {
    if window == 0 {
        return Err(Error::param("pooling window must be positive"));
    }
    let d = tape.value(x).dims5()?;
    let rows = padded_map(d.h, window);
    let cols = padded_map(d.w, window);
    let od = d.with_hw(d.h.div_ceil(window), d.w.div_ceil(window));
    let inv = 1.0 / (window * window) as f64;
    let xd = tape.value(x).data();
    let mut out = vec![0.0f32; od.numel()];
    let mut acc = vec![0.0f64; od.plane()];
    for p in 0..d.frames() * d.c {
        let src = &xd[p * d.plane()..(p + 1) * d.plane()];
        acc.fill(0.0);
        for (py, &sy) in rows.iter().enumerate() {
            for (px, &sx) in cols.iter().enumerate() {
                acc[(py / window) * od.w + px / window] += src[sy * d.w + sx] as f64;
            }
        }
        for (o, a) in out[p * od.plane()..(p + 1) * od.plane()].iter_mut().zip(&acc) {
            *o = (a * inv) as f32;
        }
    }
    let out = Tensor::from_vec5(od, out)?;
    Ok(tape.push(out, vec![x], Box::new(AvgPoolOp { input: d, window })))
}

struct GapOp {
    input: Dims5,
}

impl BackwardOp for GapOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let d = self.input;
        let hw = d.plane();
        let inv = 1.0 / hw as f32;
        let mut gx = Vec::with_capacity(d.numel());
        for &v in g.data() {
            gx.extend(std::iter::repeat_n(v * inv, hw));
        }
        vec![Some(Tensor::from_vec5(d, gx).unwrap())]
    }
}

/// Global average over each `H × W` plane.
pub fn adaptive_gap(tape: &mut Tape, x: Var) -> Result<Var> {
    let d = tape.value(x).dims5()?;
    let hw = d.plane();
    let out: Vec<f32> = tape
        .value(x)
        .data()
        .chunks_exact(hw)
        .map(|p| (p.iter().map(|&v| v as f64).sum::<f64>() / hw as f64) as f32)
        .collect();
    let out = Tensor::from_vec5(d.with_hw(1, 1), out)?;
    Ok(tape.push(out, vec![x], Box::new(GapOp { input: d })))
}

fn nearest_map(src: usize, dst: usize) -> Vec<usize> {
    (0..dst).map(|i| i * src / dst).collect()
}

struct UpsampleOp {
    input: Dims5,
    oh: usize,
    ow: usize,
}

impl BackwardOp for UpsampleOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let d = self.input;
        let rows = nearest_map(d.h, self.oh);
        let cols = nearest_map(d.w, self.ow);
        let mut gx = vec![0.0f32; d.numel()];
        let oplane = self.oh * self.ow;
        for (p, go) in g.data().chunks_exact(oplane).enumerate() {
            let dst = &mut gx[p * d.plane()..(p + 1) * d.plane()];
            for (i, &sy) in rows.iter().enumerate() {
                for (j, &sx) in cols.iter().enumerate() {
                    dst[sy * d.w + sx] += go[i * self.ow + j];
                }
            }
        }
        vec![Some(Tensor::from_vec5(d, gx).unwrap())]
    }
}

/// Nearest-neighbour upsampling: output `(i, j)` copies source
/// `(⌊i·H/outH⌋, ⌊j·W/outW⌋)`.
pub fn upsample_nearest(tape: &mut Tape, x: Var, oh: usize, ow: usize) -> Result<Var> {
    if oh == 0 || ow == 0 {
        return Err(Error::param("upsample target dimensions must be positive"));
    }
    let d = tape.value(x).dims5()?;
    if oh < d.h || ow < d.w {
        return Err(Error::param(format!(
            "upsample target {oh}×{ow} is smaller than source {}×{}",
            d.h, d.w
        )));
    }
    let rows = nearest_map(d.h, oh);
    let cols = nearest_map(d.w, ow);
    let xd = tape.value(x).data();
    let mut out = Vec::with_capacity(d.frames() * d.c * oh * ow);
    for src in xd.chunks_exact(d.plane()) {
        for &sy in &rows {
            let row = &src[sy * d.w..(sy + 1) * d.w];
            out.extend(cols.iter().map(|&sx| row[sx]));
        }
    }
    let out = Tensor::from_vec5(d.with_hw(oh, ow), out)?;
    Ok(tape.push(out, vec![x], Box::new(UpsampleOp { input: d, oh, ow })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: usize, w: usize, v: &[f32]) -> Tensor {
        Tensor::from_vec(vec![1, 1, 1, h, w], v.to_vec()).unwrap()
    }

    #[test]
    fn avgpool_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let y = avgpool2d(&mut tape, x, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[2.5]);
        let id = avgpool2d(&mut tape, x, 1).unwrap();
        assert_eq!(tape.value(id), tape.value(x));
        let c = tape.constant(Tensor::full(&[2, 1, 3, 8, 8], 0.7));
        let p = avgpool2d(&mut tape, c, 4).unwrap();
        assert!(tape.value(p).data().iter().all(|&v| (v - 0.7).abs() < 1e-7));
        assert!(matches!(avgpool2d(&mut tape, x, 0), Err(Error::Param(_))));
    }

    #[test]
    fn avgpool_reflect_pads_odd_sizes() {
        let mut tape = Tape::new();
        // 3 columns, window 2 -> padded column 3 mirrors column 1
        let x = tape.constant(t(2, 3, &[1.0, 2.0, 3.0, 5.0, 6.0, 7.0]));
        let y = avgpool2d(&mut tape, x, 2).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 1, 1, 1, 2]);
        assert_eq!(tape.value(y).data(), &[3.5, 4.5]);
    }

    #[test]
    fn reflect_index_folds() {
        let n = 3;
        let got: Vec<usize> = (-3..7).map(|i| reflect_index(i, n)).collect();
        assert_eq!(got, vec![1, 2, 1, 0, 1, 2, 1, 0, 1, 2]);
        assert_eq!(reflect_index(5, 1), 0);
    }

    #[test]
    fn gap_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(2, 2, &[0.0, 0.0, 0.0, 4.0]));
        let y = adaptive_gap(&mut tape, x).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0]);
        let c = tape.constant(Tensor::full(&[2, 2, 3, 5, 4], -1.5));
        let g = adaptive_gap(&mut tape, c).unwrap();
        let back = upsample_nearest(&mut tape, g, 5, 4).unwrap();
        assert_eq!(tape.value(back), tape.value(c));
    }

    #[test]
    fn upsample_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let y = upsample_nearest(&mut tape, x, 4, 4).unwrap();
        #[rustfmt::skip]
        let expect = [1.0, 1.0, 2.0, 2.0,
                      1.0, 1.0, 2.0, 2.0,
                      3.0, 3.0, 4.0, 4.0,
                      3.0, 3.0, 4.0, 4.0];
        assert_eq!(tape.value(y).data(), &expect);
        let same = upsample_nearest(&mut tape, x, 2, 2).unwrap();
        assert_eq!(tape.value(same), tape.value(x));
        let one = tape.constant(t(1, 1, &[0.3]));
        let b = upsample_nearest(&mut tape, one, 3, 5).unwrap();
        assert!(tape.value(b).data().iter().all(|&v| v == 0.3));
        assert!(matches!(upsample_nearest(&mut tape, x, 0, 4), Err(Error::Param(_))));
    }
}
