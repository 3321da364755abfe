//! Shared finite-difference harness and fixtures for integration tests.
#![allow(dead_code)]

pub mod gradsuite;
pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uiesnn::autograd::{ParamStore, Tape, Var};
use uiesnn::layers::Ctx;
use uiesnn::spiking::FreezeMode;
use uiesnn::{ops, Result, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(shape: &[usize], scale: f32, rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0f32..1.0) * scale).collect()).unwrap()
}

/// Random values with magnitude at least `gap`, away from kinks at zero.
pub fn rand_away(shape: &[usize], gap: f32, rng: &mut impl Rng) -> Tensor {
    randn(shape, 1.0, rng).map(|v| if v >= 0.0 { v + gap } else { v - gap })
}

pub fn uniform01(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape.to_vec(), (0..n).map(|_| rng.gen_range(0.0f32..1.0)).collect()).unwrap()
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    let denom = na.max(nn);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

fn dot(out: &Tensor, w: &Tensor) -> f64 {
    out.data().iter().zip(w.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
}

/// Central-difference check of a primitive over every input element.
/// The scalar objective is `Σ w ⊙ f(inputs)` with fixed random `w`.
pub fn check_primitive(inputs: &[Tensor], h: f32, f: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = f(&mut tape, &vars);
    let w = randn(tape.value(out).shape(), 1.0, &mut rng(99));
    let loss = ops::weighted_sum(&mut tape, out, &w).unwrap();
    tape.backward(loss, &mut ParamStore::new()).unwrap();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        let g = tape.grad(vars[i]).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()));
        analytic.extend(g.data().iter().map(|&v| v as f64));
        for j in 0..x.numel() {
            let eval = |delta: f32| {
                let mut t = Tape::new();
                let vs: Vec<Var> = inputs
                    .iter()
                    .enumerate()
                    .map(|(k, v)| {
                        let mut v = v.clone();
                        if k == i {
                            v.data_mut()[j] += delta;
                        }
                        t.constant(v)
                    })
                    .collect();
                let o = f(&mut t, &vs);
                dot(t.value(o), &w)
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h as f64));
        }
    }
    rel_err(&analytic, &numeric)
}

/// Central difference at `h` and `h/2` combined to cancel the `h²` term.
fn richardson(central: &mut dyn FnMut(f32) -> f64, h: f32) -> f64 {
    let (coarse, fine) = (central(h), central(h / 2.0));
    (4.0 * fine - coarse) / 3.0
}

pub struct BlockGrad {
    pub input_err: f64,
    pub param_err: f64,
}

fn run_frozen(store: &mut ParamStore, training: bool, input: &Tensor, residuals: &[Tensor], f: &dyn Fn(&mut Ctx, Var) -> Result<Var>) -> Tensor {
    let mut ctx = Ctx::new(store, training).with_freeze(FreezeMode::replay(residuals.to_vec()));
    let x = ctx.tape.constant(input.clone());
    let out = f(&mut ctx, x).unwrap();
    ctx.value(out).clone()
}

/// Finite-difference check of a spiking composite against its surrogate
/// backward. Spikes are recorded once; every later forward replays them.
/// `samples` coordinates are drawn from the input and from the trainable
/// parameters. `training` selects batch (true) or running normalisation
/// statistics.
pub fn check_block(store: &mut ParamStore, training: bool, input: &Tensor, samples: usize, h: f32, seed: u64, f: &dyn Fn(&mut Ctx, Var) -> Result<Var>) -> BlockGrad {
    let residuals = {
        let mut ctx = Ctx::new(store, training).with_freeze(FreezeMode::Record(Vec::new()));
        let x = ctx.tape.constant(input.clone());
        f(&mut ctx, x).unwrap();
        std::mem::take(&mut ctx.freeze).into_residuals()
    };
    store.zero_grads();
    let (w, gx) = {
        let mut ctx = Ctx::new(store, training).with_freeze(FreezeMode::replay(residuals.clone()));
        let x = ctx.tape.leaf(input.clone(), true);
        let out = f(&mut ctx, x).unwrap();
        let w = randn(ctx.value(out).shape(), 1.0, &mut rng(seed ^ 0xabc));
        let loss = ops::weighted_sum(&mut ctx.tape, out, &w).unwrap();
        let mut tape = std::mem::take(&mut ctx.tape);
        drop(ctx);
        tape.backward(loss, store).unwrap();
        (w, tape.grad(x).cloned().unwrap())
    };
    let r = &mut rng(seed);
    let loss_at = |store: &mut ParamStore, x: &Tensor| dot(&run_frozen(store, training, x, &residuals, f), &w);

    let (mut a_in, mut n_in) = (Vec::new(), Vec::new());
    for _ in 0..samples {
        let j = r.gen_range(0..input.numel());
        let mut central = |step: f32| {
            let mut xp = input.clone();
            xp.data_mut()[j] += step;
            let mut xm = input.clone();
            xm.data_mut()[j] -= step;
            (loss_at(store, &xp) - loss_at(store, &xm)) / (2.0 * step as f64)
        };
        n_in.push(richardson(&mut central, h));
        a_in.push(gx.data()[j] as f64);
    }

    let trainable: Vec<(usize, usize)> = store.iter().filter(|p| p.trainable).map(|p| (p.id, p.value.numel())).collect();
    let total: usize = trainable.iter().map(|t| t.1).sum();
    let (mut a_p, mut n_p) = (Vec::new(), Vec::new());
    for _ in 0..if total == 0 { 0 } else { samples } {
        let mut k = r.gen_range(0..total);
        let &(id, _) = trainable
            .iter()
            .find(|&&(_, n)| {
                if k < n {
                    true
                } else {
                    k -= n;
                    false
                }
            })
            .unwrap();
        let orig = store.value(id).data()[k];
        a_p.push(store.get(id).grad.data()[k] as f64);
        let mut central = |step: f32| {
            store.value_mut(id).data_mut()[k] = orig + step;
            let lp = loss_at(store, input);
            store.value_mut(id).data_mut()[k] = orig - step;
            let lm = loss_at(store, input);
            store.value_mut(id).data_mut()[k] = orig;
            (lp - lm) / (2.0 * step as f64)
        };
        n_p.push(richardson(&mut central, h));
    }
    BlockGrad {
        input_err: rel_err(&a_in, &n_in),
        param_err: rel_err(&a_p, &n_p),
    }
}
