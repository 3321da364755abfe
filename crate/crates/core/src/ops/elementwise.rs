//! Elementwise arithmetic, with rank-preserving broadcasting of the second
//! operand (each of its dimensions is 1 or equal to the first operand's).

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn same_shape(tape: &Tape, a: Var, b: Var, what: &str) -> Result<()> {
    let (sa, sb) = (tape.value(a).shape(), tape.value(b).shape());
    if sa != sb {
        return Err(Error::shape(format!("{what}: shapes {sa:?} and {sb:?} differ")));
    }
    Ok(())
}

struct AddOp;
impl BackwardOp for AddOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        vec![Some(g.clone()), Some(g.clone())]
    }
}

pub fn add(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    same_shape(tape, a, b, "add")?;
    let mut out = tape.value(a).clone();
    out.add_assign(tape.value(b));
    Ok(tape.push(out, vec![a, b], Box::new(AddOp)))
}

struct SubOp;
impl BackwardOp for SubOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        vec![Some(g.clone()), needs[1].then(|| g.map(|x| -x))]
    }
}

pub fn sub(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    same_shape(tape, a, b, "sub")?;
    let (va, vb) = (tape.value(a), tape.value(b));
    let data = va.data().iter().zip(vb.data()).map(|(x, y)| x - y).collect();
    let out = Tensor::from_vec(va.shape().to_vec(), data)?;
    Ok(tape.push(out, vec![a, b], Box::new(SubOp)))
}

struct MulOp;
impl BackwardOp for MulOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let prod = |other: &Tensor| {
            let d = g.data().iter().zip(other.data()).map(|(a, b)| a * b).collect();
            Tensor::from_vec(g.shape().to_vec(), d).unwrap()
        };
        vec![needs[0].then(|| prod(inputs[1])), needs[1].then(|| prod(inputs[0]))]
    }
}

pub fn mul(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    same_shape(tape, a, b, "mul")?;
    let (va, vb) = (tape.value(a), tape.value(b));
    let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
    let out = Tensor::from_vec(va.shape().to_vec(), data)?;
    Ok(tape.push(out, vec![a, b], Box::new(MulOp)))
}

struct ScaleOp(f32);
impl BackwardOp for ScaleOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        vec![Some(g.map(|x| x * self.0))]
    }
}

pub fn scale(tape: &mut Tape, x: Var, s: f32) -> Var {
    let out = tape.value(x).map(|v| v * s);
    tape.push(out, vec![x], Box::new(ScaleOp(s)))
}

struct ReluOp;
impl BackwardOp for ReluOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let d = g
            .data()
            .iter()
            .zip(inputs[0].data())
            .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
            .collect();
        vec![Some(Tensor::from_vec(g.shape().to_vec(), d).unwrap())]
    }
}

pub fn relu(tape: &mut Tape, x: Var) -> Var {
    let out = tape.value(x).map(|v| v.max(0.0));
    tape.push(out, vec![x], Box::new(ReluOp))
}

pub(crate) fn logistic(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

struct SigmoidOp;
impl BackwardOp for SigmoidOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], out: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let d = g
            .data()
            .iter()
            .zip(out.data())
            .map(|(g, s)| g * s * (1.0 - s))
            .collect();
        vec![Some(Tensor::from_vec(g.shape().to_vec(), d).unwrap())]
    }
}

pub fn sigmoid(tape: &mut Tape, x: Var) -> Var {
    let out = tape.value(x).map(logistic);
    tape.push(out, vec![x], Box::new(SigmoidOp))
}

/// Shape of `b` padded with leading 1s to the rank of `a`, validated for
/// broadcasting.
fn bcast_shape(a: &[usize], b: &[usize]) -> Result<[usize; 5]> {
    if b.len() > a.len() || a.len() > 5 {
        return Err(Error::shape(format!("cannot broadcast {b:?} onto {a:?}")));
    }
    let mut out = [1usize; 5];
    let off = 5 - b.len();
    out[off..].copy_from_slice(b);
    let mut full = [1usize; 5];
    full[5 - a.len()..].copy_from_slice(a);
    for i in 0..5 {
        if out[i] != 1 && out[i] != full[i] {
            return Err(Error::shape(format!("cannot broadcast {b:?} onto {a:?}")));
        }
    }
    Ok(out)
}

fn pad5(a: &[usize]) -> [usize; 5] {
    let mut full = [1usize; 5];
    full[5 - a.len()..].copy_from_slice(a);
    full
}

/// Visits every element of `a` paired with its broadcast index into `b`.
/// The callback receives the contiguous run along the last axis.
fn for_each_bcast(a: [usize; 5], b: [usize; 5], mut f: impl FnMut(usize, usize, bool)) {
    let mut bs = [0usize; 5];
    let mut acc = 1;
    for i in (0..5).rev() {
        bs[i] = if b[i] == 1 { 0 } else { acc };
        acc *= b[i];
    }
    let last = a[4];
    let mut ai = 0;
    for i0 in 0..a[0] {
        for i1 in 0..a[1] {
            for i2 in 0..a[2] {
                for i3 in 0..a[3] {
                    let bi = i0 * bs[0] + i1 * bs[1] + i2 * bs[2] + i3 * bs[3];
                    f(ai, bi, b[4] == 1);
                    ai += last;
                }
            }
        }
    }
}

struct MulBcastOp {
    a: [usize; 5],
    b: [usize; 5],
}

impl BackwardOp for MulBcastOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let (x, y) = (inputs[0].data(), inputs[1].data());
        let gd = g.data();
        let n = self.a[4];
        let mut gx = needs[0].then(|| vec![0.0f32; x.len()]);
        let mut gy = needs[1].then(|| vec![0.0f32; y.len()]);
        for_each_bcast(self.a, self.b, |ai, bi, scalar| {
            if let Some(gx) = gx.as_mut() {
                for j in 0..n {
                    gx[ai + j] = gd[ai + j] * y[if scalar { bi } else { bi + j }];
                }
            }
            if let Some(gy) = gy.as_mut() {
                if scalar {
                    let s: f32 = (0..n).map(|j| gd[ai + j] * x[ai + j]).sum();
                    gy[bi] += s;
                } else {
                    for j in 0..n {
                        gy[bi + j] += gd[ai + j] * x[ai + j];
                    }
                }
            }
        });
        vec![
            gx.map(|d| Tensor::from_vec(inputs[0].shape().to_vec(), d).unwrap()),
            gy.map(|d| Tensor::from_vec(inputs[1].shape().to_vec(), d).unwrap()),
        ]
    }
}

/// `a ⊙ b` with `b` broadcast over `a`.
pub fn mul_bcast(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let sa = tape.value(a).shape().to_vec();
    let bshape = bcast_shape(&sa, tape.value(b).shape())?;
    let ashape = pad5(&sa);
    let (x, y) = (tape.value(a).data(), tape.value(b).data());
    let mut out = vec![0.0f32; x.len()];
    let n = ashape[4];
    for_each_bcast(ashape, bshape, |ai, bi, scalar| {
        for j in 0..n {
            out[ai + j] = x[ai + j] * y[if scalar { bi } else { bi + j }];
        }
    });
    let out = Tensor::from_vec(sa, out)?;
    Ok(tape.push(out, vec![a, b], Box::new(MulBcastOp { a: ashape, b: bshape })))
}

struct AddBcastOp {
    a: [usize; 5],
    b: [usize; 5],
}

impl BackwardOp for AddBcastOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let gd = g.data();
        let n = self.a[4];
        let gy = needs[1].then(|| {
            let mut gy = vec![0.0f32; inputs[1].numel()];
            for_each_bcast(self.a, self.b, |ai, bi, scalar| {
                if scalar {
                    gy[bi] += gd[ai..ai + n].iter().sum::<f32>();
                } else {
                    for j in 0..n {
                        gy[bi + j] += gd[ai + j];
                    }
                }
            });
            Tensor::from_vec(inputs[1].shape().to_vec(), gy).unwrap()
        });
        vec![needs[0].then(|| g.clone()), gy]
    }
}

/// `a + b` with `b` broadcast over `a`.
pub fn add_bcast(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let sa = tape.value(a).shape().to_vec();
    let bshape = bcast_shape(&sa, tape.value(b).shape())?;
    let ashape = pad5(&sa);
    let (x, y) = (tape.value(a).data(), tape.value(b).data());
    let mut out = x.to_vec();
    let n = ashape[4];
    for_each_bcast(ashape, bshape, |ai, bi, scalar| {
        for j in 0..n {
            out[ai + j] += y[if scalar { bi } else { bi + j }];
        }
    });
    let out = Tensor::from_vec(sa, out)?;
    Ok(tape.push(out, vec![a, b], Box::new(AddBcastOp { a: ashape, b: bshape })))
}
