//! Channel slicing/concatenation, temporal replication and reshapes.

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Dims5, Tensor};

struct SliceOp {
    input: Dims5,
    c0: usize,
    c1: usize,
}

impl BackwardOp for SliceOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let d = self.input;
        let hw = d.plane();
        let width = (self.c1 - self.c0) * hw;
        let mut out = vec![0.0f32; d.numel()];
        let gd = g.data();
        for f in 0..d.frames() {
            let dst = (f * d.c + self.c0) * hw;
            out[dst..dst + width].copy_from_slice(&gd[f * width..(f + 1) * width]);
        }
        vec![Some(Tensor::from_vec5(d, out).unwrap())]
    }
}

/// Channels `c0..c1` of a rank-5 tensor.
pub fn channel_slice(tape: &mut Tape, x: Var, c0: usize, c1: usize) -> Result<Var> {
    let d = tape.value(x).dims5()?;
    if c0 >= c1 || c1 > d.c {
        return Err(Error::shape(format!("channel range {c0}..{c1} outside 0..{}", d.c)));
    }
    let hw = d.plane();
    let width = (c1 - c0) * hw;
    let xd = tape.value(x).data();
    let mut out = Vec::with_capacity(d.frames() * width);
    for f in 0..d.frames() {
        let src = (f * d.c + c0) * hw;
        out.extend_from_slice(&xd[src..src + width]);
    }
    let out = Tensor::from_vec5(d.with_c(c1 - c0), out)?;
    Ok(tape.push(out, vec![x], Box::new(SliceOp { input: d, c0, c1 })))
}

/// Splits channels into four equal groups, in order.
pub fn channel_split4(tape: &mut Tape, x: Var) -> Result<[Var; 4]> {
    let c = tape.value(x).dims5()?.c;
    if c % 4 != 0 {
        return Err(Error::shape(format!("channel count {c} is not divisible by 4")));
    }
    let q = c / 4;
    Ok([
        channel_slice(tape, x, 0, q)?,
        channel_slice(tape, x, q, 2 * q)?,
        channel_slice(tape, x, 2 * q, 3 * q)?,
        channel_slice(tape, x, 3 * q, c)?,
    ])
}

struct ConcatOp {
    dims: Vec<Dims5>,
}

impl BackwardOp for ConcatOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let ctot: usize = self.dims.iter().map(|d| d.c).sum();
        let hw = self.dims[0].plane();
        let frames = self.dims[0].frames();
        let gd = g.data();
        let mut c0 = 0;
        let mut grads = Vec::with_capacity(self.dims.len());
        for (d, &need) in self.dims.iter().zip(needs) {
            if need {
                let width = d.c * hw;
                let mut out = Vec::with_capacity(d.numel());
                for f in 0..frames {
                    let src = (f * ctot + c0) * hw;
                    out.extend_from_slice(&gd[src..src + width]);
                }
                grads.push(Some(Tensor::from_vec5(*d, out).unwrap()));
            } else {
                grads.push(None);
            }
            c0 += d.c;
        }
        grads
    }
}

/// Channel-wise concatenation; all inputs share T, B, H, W.
pub fn channel_concat(tape: &mut Tape, xs: &[Var]) -> Result<Var> {
    if xs.is_empty() {
        return Err(Error::shape("concat of an empty list"));
    }
    let dims = xs
        .iter()
        .map(|&v| tape.value(v).dims5())
        .collect::<Result<Vec<_>>>()?;
    let d0 = dims[0];
    for d in &dims[1..] {
        if (d.t, d.b, d.h, d.w) != (d0.t, d0.b, d0.h, d0.w) {
            return Err(Error::shape(format!("concat: {d} does not match {d0} outside channels")));
        }
    }
    let ctot: usize = dims.iter().map(|d| d.c).sum();
    let hw = d0.plane();
    let mut out = Vec::with_capacity(d0.frames() * ctot * hw);
    for f in 0..d0.frames() {
        for (&v, d) in xs.iter().zip(&dims) {
            let width = d.c * hw;
            out.extend_from_slice(&tape.value(v).data()[f * width..(f + 1) * width]);
        }
    }
    let out = Tensor::from_vec5(d0.with_c(ctot), out)?;
    Ok(tape.push(out, xs.to_vec(), Box::new(ConcatOp { dims })))
}

struct ReplicateOp {
    steps: usize,
}

impl BackwardOp for ReplicateOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let n = inputs[0].numel();
        let mut out = vec![0.0f32; n];
        for t in 0..self.steps {
            for (o, v) in out.iter_mut().zip(&g.data()[t * n..(t + 1) * n]) {
                *o += v;
            }
        }
        vec![Some(Tensor::from_vec(inputs[0].shape().to_vec(), out).unwrap())]
    }
}

/// Repeats a `1 × B × C × H × W` tensor along the time axis.
pub fn replicate_temporal(tape: &mut Tape, x: Var, steps: usize) -> Result<Var> {
    let d = tape.value(x).dims5()?;
    if d.t != 1 {
        return Err(Error::shape(format!("replicate_temporal expects T=1, got {d}")));
    }
    if steps == 0 {
        return Err(Error::param("timesteps must be at least 1"));
    }
    let xd = tape.value(x).data();
    let mut out = Vec::with_capacity(xd.len() * steps);
    for _ in 0..steps {
        out.extend_from_slice(xd);
    }
    let out = Tensor::from_vec5(d.with_t(steps), out)?;
    Ok(tape.push(out, vec![x], Box::new(ReplicateOp { steps })))
}

struct ReshapeOp;
impl BackwardOp for ReshapeOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        vec![Some(g.clone().reshaped(inputs[0].shape()).unwrap())]
    }
}

pub fn reshape(tape: &mut Tape, x: Var, shape: &[usize]) -> Result<Var> {
    let out = tape.value(x).clone().reshaped(shape)?;
    Ok(tape.push(out, vec![x], Box::new(ReshapeOp)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::ParamStore;

    fn ramp(d: Dims5) -> Tensor {
        Tensor::from_vec5(d, (0..d.numel()).map(|v| v as f32 * 0.5 - 3.0).collect()).unwrap()
    }

    #[test]
    fn split4_takes_channels_in_order() {
        let mut tape = Tape::new();
        let d = Dims5::new(1, 1, 4, 1, 2);
        let x = tape.constant(ramp(d));
        let parts = channel_split4(&mut tape, x).unwrap();
        for (i, p) in parts.iter().enumerate() {
            let v = tape.value(*p);
            assert_eq!(v.shape(), &[1, 1, 1, 1, 2]);
            assert_eq!(v.data(), &tape.value(x).data()[2 * i..2 * i + 2]);
        }
    }

    #[test]
    fn split4_rejects_indivisible_channels() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros5(Dims5::new(1, 1, 6, 2, 2)));
        assert!(matches!(channel_split4(&mut tape, x), Err(Error::Shape(_))));
    }

    #[test]
    fn concat_of_split_is_bitwise_identity() {
        let mut tape = Tape::new();
        let d = Dims5::new(2, 3, 8, 3, 5);
        let x = tape.constant(ramp(d));
        let parts = channel_split4(&mut tape, x).unwrap();
        let y = channel_concat(&mut tape, &parts).unwrap();
        assert_eq!(tape.value(x), tape.value(y));
    }

    #[test]
    fn gradient_routes_to_second_group() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let d = Dims5::new(2, 1, 8, 2, 2);
        let x = tape.leaf(ramp(d), true);
        let parts = channel_split4(&mut tape, x).unwrap();
        let l = crate::ops::sum_all(&mut tape, parts[1]);
        tape.backward(l, &mut store).unwrap();
        let g = tape.grad(x).unwrap();
        for t in 0..2 {
            for c in 0..8 {
                let expect = if (2..4).contains(&c) { 1.0 } else { 0.0 };
                for h in 0..2 {
                    for w in 0..2 {
                        assert_eq!(g.at5(t, 0, c, h, w), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn replicate_copies_and_sums_back() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let d = Dims5::new(1, 2, 3, 2, 2);
        let x = tape.leaf(ramp(d), true);
        let y = replicate_temporal(&mut tape, x, 4).unwrap();
        let v = tape.value(y);
        let n = d.numel();
        for t in 0..4 {
            assert_eq!(&v.data()[t * n..(t + 1) * n], tape.value(x).data());
        }
        let single = replicate_temporal(&mut tape, x, 1).unwrap();
        assert_eq!(tape.value(single), tape.value(x));
        let l = crate::ops::sum_all(&mut tape, y);
        tape.backward(l, &mut store).unwrap();
        assert!(tape.grad(x).unwrap().data().iter().all(|&g| g == 4.0));
    }
}
