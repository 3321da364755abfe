//! Reductions. Sums accumulate in `f64`.

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

struct SumAllOp(f32);
impl BackwardOp for SumAllOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let v = g.data()[0] * self.0;
        vec![Some(Tensor::full(inputs[0].shape(), v))]
    }
}

pub fn sum_all(tape: &mut Tape, x: Var) -> Var {
    let s = tape.value(x).sum_f64() as f32;
    tape.push(Tensor::scalar(s), vec![x], Box::new(SumAllOp(1.0)))
}

pub fn mean_all(tape: &mut Tape, x: Var) -> Var {
    let v = tape.value(x);
    let n = v.numel() as f32;
    let s = v.mean_f64() as f32;
    tape.push(Tensor::scalar(s), vec![x], Box::new(SumAllOp(1.0 / n)))
}

struct MeanAbsOp;
impl BackwardOp for MeanAbsOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let x = inputs[0];
        let k = g.data()[0] / x.numel() as f32;
        vec![Some(x.map(|v| {
            if v > 0.0 {
                k
            } else if v < 0.0 {
                -k
            } else {
                0.0
            }
        }))]
    }
}

/// Mean absolute value of every element, as a scalar.
pub fn mean_abs(tape: &mut Tape, x: Var) -> Var {
    let v = tape.value(x);
    let s = v.data().iter().map(|&a| a.abs() as f64).sum::<f64>() / v.numel() as f64;
    tape.push(Tensor::scalar(s as f32), vec![x], Box::new(MeanAbsOp))
}

struct WeightedSumOp(Tensor);
impl BackwardOp for WeightedSumOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let k = g.data()[0];
        vec![Some(self.0.map(|w| w * k))]
    }
}

/// `Σ x ⊙ w` for a constant weight tensor of the same element count.
pub fn weighted_sum(tape: &mut Tape, x: Var, weights: &Tensor) -> Result<Var> {
    let v = tape.value(x);
    if v.numel() != weights.numel() {
        return Err(Error::shape("weighted_sum: element counts differ"));
    }
    let s: f64 = v
        .data()
        .iter()
        .zip(weights.data())
        .map(|(a, b)| *a as f64 * *b as f64)
        .sum();
    Ok(tape.push(Tensor::scalar(s as f32), vec![x], Box::new(WeightedSumOp(weights.clone()))))
}

fn strides(shape: &[usize; 5]) -> [usize; 5] {
    let mut s = [0; 5];
    let mut acc = 1;
    for i in (0..5).rev() {
        s[i] = acc;
        acc *= shape[i];
    }
    s
}

fn reduced_index(idx: [usize; 5], keep: &[bool; 5], ostr: &[usize; 5]) -> usize {
    (0..5).filter(|&i| keep[i]).map(|i| idx[i] * ostr[i]).sum()
}

fn for_each_index(shape: [usize; 5], mut f: impl FnMut(usize, [usize; 5])) {
    let mut flat = 0;
    for a in 0..shape[0] {
        for b in 0..shape[1] {
            for c in 0..shape[2] {
                for d in 0..shape[3] {
                    for e in 0..shape[4] {
                        f(flat, [a, b, c, d, e]);
                        flat += 1;
                    }
                }
            }
        }
    }
}

struct MeanAxesOp {
    shape: [usize; 5],
    keep: [bool; 5],
    count: f32,
}

impl BackwardOp for MeanAxesOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let oshape: [usize; 5] = std::array::from_fn(|i| if self.keep[i] { self.shape[i] } else { 1 });
        let ostr = strides(&oshape);
        let gd = g.data();
        let mut out = vec![0.0f32; inputs[0].numel()];
        let inv = 1.0 / self.count;
        for_each_index(self.shape, |flat, idx| {
            out[flat] = gd[reduced_index(idx, &self.keep, &ostr)] * inv;
        });
        vec![Some(Tensor::from_vec(inputs[0].shape().to_vec(), out).unwrap())]
    }
}

/// Mean over the rank-5 axes flagged in `axes`, keeping them as size 1.
pub fn mean_axes(tape: &mut Tape, x: Var, axes: [bool; 5]) -> Result<Var> {
    let d = tape.value(x).dims5()?;
    let shape = [d.t, d.b, d.c, d.h, d.w];
    let keep: [bool; 5] = std::array::from_fn(|i| !axes[i]);
    let oshape: [usize; 5] = std::array::from_fn(|i| if keep[i] { shape[i] } else { 1 });
    let ostr = strides(&oshape);
    let count: usize = (0..5).filter(|&i| axes[i]).map(|i| shape[i]).product();
    let mut acc = vec![0.0f64; oshape.iter().product()];
    let xd = tape.value(x).data();
    for_each_index(shape, |flat, idx| {
        acc[reduced_index(idx, &keep, &ostr)] += xd[flat] as f64;
    });
    let data = acc.iter().map(|&s| (s / count as f64) as f32).collect();
    let out = Tensor::from_vec(oshape.to_vec(), data)?;
    Ok(tape.push(
        out,
        vec![x],
        Box::new(MeanAxesOp {
            shape,
            keep,
            count: count as f32,
        }),
    ))
}
