use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

struct LinearOp {
    n: usize,
    fin: usize,
    fout: usize,
}

impl BackwardOp for LinearOp {
    fn backward(&self, g: &Tensor, inputs: &[&Tensor], _: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let (x, w) = (inputs[0].data(), inputs[1].data());
        let gd = g.data();
        let (n, fi, fo) = (self.n, self.fin, self.fout);
        let gx = needs[0].then(|| {
            let mut gx = vec![0.0f32; n * fi];
            for r in 0..n {
                for o in 0..fo {
                    let go = gd[r * fo + o];
                    for i in 0..fi {
                        gx[r * fi + i] += go * w[o * fi + i];
                    }
                }
            }
            Tensor::from_vec(inputs[0].shape().to_vec(), gx).unwrap()
        });
        let gw = needs[1].then(|| {
            let mut gw = vec![0.0f32; fo * fi];
            for r in 0..n {
                for o in 0..fo {
                    let go = gd[r * fo + o];
                    for i in 0..fi {
                        gw[o * fi + i] += go * x[r * fi + i];
                    }
                }
            }
            Tensor::from_vec(inputs[1].shape().to_vec(), gw).unwrap()
        });
        let gb = needs[2].then(|| {
            let mut gb = vec![0.0f32; fo];
            for r in 0..n {
                for o in 0..fo {
                    gb[o] += gd[r * fo + o];
                }
            }
            Tensor::from_vec(inputs[2].shape().to_vec(), gb).unwrap()
        });
        vec![gx, gw, gb]
    }
}

/// Fully connected layer: `x[n×in] · wᵀ + b` with `w[out×in]`, `b[out]`.
pub fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let (n, fin) = match tape.value(x).shape() {
        &[n, f] => (n, f),
        s => return Err(Error::shape(format!("linear input must be n×in, got {s:?}"))),
    };
    let fout = match tape.value(w).shape() {
        &[o, i] if i == fin => o,
        s => return Err(Error::shape(format!("linear weight {s:?} does not take {fin} inputs"))),
    };
    if tape.value(b).shape() != [fout] {
        return Err(Error::shape("linear bias length must equal output width"));
    }
    let (xd, wd, bd) = (tape.value(x).data(), tape.value(w).data(), tape.value(b).data());
    let mut out = vec![0.0f32; n * fout];
    for r in 0..n {
        for o in 0..fout {
            let s: f32 = (0..fin).map(|i| xd[r * fin + i] * wd[o * fin + i]).sum();
            out[r * fout + o] = s + bd[o];
        }
    }
    let out = Tensor::from_vec(vec![n, fout], out)?;
    Ok(tape.push(out, vec![x, w, b], Box::new(LinearOp { n, fin, fout })))
}
