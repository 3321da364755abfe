//! Finite-difference gradient checks: primitives against the true forward,
//! spiking composites against the surrogate backward with frozen spikes.
//! Each suite returns `(case, error)` pairs for the caller to judge.

use super::*;
use uiesnn::blocks::{BlockEnv, Fdm, Mda, Mplb, Srb, Toggles};
use uiesnn::loss::{objective, ssim_loss, target_pyramid, LossWeights};
use uiesnn::network::{MultiScale, NetConfig, Uiesnn};
use uiesnn::spiking::{self, NeuronConfig, RunningStats, TdBnConfig};

pub const PRIM_TOL: f64 = 1e-3;
pub const BLOCK_TOL: f64 = 1e-2;
const H: f32 = 1e-2;

pub type Errors = Vec<(String, f64)>;

struct Cases(Errors);

impl Cases {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn push(&mut self, name: impl Into<String>, err: f64) {
        self.0.push((name.into(), err));
    }

    fn block(&mut self, name: &str, g: BlockGrad) {
        self.push(format!("{name} input"), g.input_err);
        self.push(format!("{name} params"), g.param_err);
    }
}

pub fn elementwise() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(1);
    let a = randn(&[2, 1, 3, 4, 4], 1.0, r);
    let b = randn(&[2, 1, 3, 4, 4], 1.0, r);
    c.push("add", check_primitive(&[a.clone(), b.clone()], H, |t, v| ops::add(t, v[0], v[1]).unwrap()));
    c.push("sub", check_primitive(&[a.clone(), b.clone()], H, |t, v| ops::sub(t, v[0], v[1]).unwrap()));
    c.push("mul", check_primitive(&[a.clone(), b.clone()], H, |t, v| ops::mul(t, v[0], v[1]).unwrap()));
    c.push("scale", check_primitive(std::slice::from_ref(&a), H, |t, v| ops::scale(t, v[0], -1.7)));
    c.push("sigmoid", check_primitive(std::slice::from_ref(&a), H, |t, v| ops::sigmoid(t, v[0])));
    let away = rand_away(&[2, 1, 3, 4, 4], 0.05, r);
    c.push("relu", check_primitive(&[away], H, |t, v| ops::relu(t, v[0])));
    c.0
}

pub fn broadcast() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(2);
    let a = randn(&[2, 2, 3, 4, 4], 1.0, r);
    for bshape in [[1, 1, 3, 1, 1], [2, 1, 1, 1, 1], [1, 1, 1, 4, 4], [1, 2, 3, 1, 1]] {
        let b = randn(&bshape, 1.0, r);
        c.push(format!("mul_bcast {bshape:?}"), check_primitive(&[a.clone(), b.clone()], H, |t, v| ops::mul_bcast(t, v[0], v[1]).unwrap()));
        c.push(format!("add_bcast {bshape:?}"), check_primitive(&[a.clone(), b.clone()], H, |t, v| ops::add_bcast(t, v[0], v[1]).unwrap()));
    }
    c.0
}

pub fn conv2d() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(3);
    let x = randn(&[1, 1, 2, 4, 4], 1.0, r);
    let w = randn(&[3, 2, 3, 3], 0.5, r);
    c.push("conv sum", check_primitive(&[x, w], H, |t, v| {
        let y = ops::conv2d(t, v[0], v[1], 1, 1).unwrap();
        ops::sum_all(t, y)
    }));
    let x = randn(&[2, 2, 3, 6, 5], 1.0, r);
    for (k, stride, pad) in [(3, 1, 1), (3, 2, 1), (1, 1, 0), (3, 1, 0), (7, 1, 3)] {
        let w = randn(&[4, 3, k, k], 0.5, r);
        c.push(format!("conv k{k} s{stride} p{pad}"), check_primitive(&[x.clone(), w], H, |t, v| ops::conv2d(t, v[0], v[1], stride, pad).unwrap()));
    }
    c.0
}

pub fn linear() -> Errors {
    let r = &mut rng(4);
    let x = randn(&[3, 5], 1.0, r);
    let w = randn(&[4, 5], 1.0, r);
    let b = randn(&[4], 1.0, r);
    vec![("linear".into(), check_primitive(&[x, w, b], H, |t, v| ops::linear(t, v[0], v[1], v[2]).unwrap()))]
}

pub fn pooling_and_resampling() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(5);
    let x = randn(&[2, 1, 2, 8, 8], 1.0, r);
    for win in [1, 2, 4, 3] {
        c.push(format!("avgpool {win}"), check_primitive(std::slice::from_ref(&x), H, |t, v| ops::avgpool2d(t, v[0], win).unwrap()));
    }
    let odd = randn(&[1, 1, 2, 5, 7], 1.0, r);
    c.push("avgpool odd", check_primitive(std::slice::from_ref(&odd), H, |t, v| ops::avgpool2d(t, v[0], 2).unwrap()));
    c.push("gap", check_primitive(std::slice::from_ref(&x), H, |t, v| ops::adaptive_gap(t, v[0]).unwrap()));
    let small = randn(&[1, 2, 2, 3, 2], 1.0, r);
    c.push("upsample", check_primitive(std::slice::from_ref(&small), H, |t, v| ops::upsample_nearest(t, v[0], 6, 4).unwrap()));
    c.push("upsample ragged", check_primitive(&[small], H, |t, v| ops::upsample_nearest(t, v[0], 7, 5).unwrap()));
    c.push("bilinear down", check_primitive(&[x], H, |t, v| ops::resize_bilinear(t, v[0], 4, 3).unwrap()));
    c.push("bilinear up", check_primitive(&[odd], H, |t, v| ops::resize_bilinear(t, v[0], 9, 11).unwrap()));
    c.0
}

pub fn reductions() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(6);
    let x = randn(&[2, 2, 3, 3, 4], 1.0, r);
    c.push("sum_all", check_primitive(std::slice::from_ref(&x), H, |t, v| ops::sum_all(t, v[0])));
    c.push("mean_all", check_primitive(std::slice::from_ref(&x), H, |t, v| ops::mean_all(t, v[0])));
    let away = rand_away(&[2, 2, 3, 3, 4], 0.05, r);
    c.push("mean_abs", check_primitive(&[away], H, |t, v| ops::mean_abs(t, v[0])));
    let w = randn(&[2, 2, 3, 3, 4], 1.0, r);
    c.push("weighted_sum", check_primitive(std::slice::from_ref(&x), H, |t, v| ops::weighted_sum(t, v[0], &w).unwrap()));
    for axes in [[true, false, false, false, false], [false, true, true, true, true], [true, true, false, true, true]] {
        c.push(format!("mean_axes {axes:?}"), check_primitive(std::slice::from_ref(&x), H, |t, v| ops::mean_axes(t, v[0], axes).unwrap()));
    }
    c.0
}

pub fn shape_ops() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(7);
    let x = randn(&[2, 1, 8, 3, 3], 1.0, r);
    let y = randn(&[2, 1, 3, 3, 3], 1.0, r);
    c.push("slice", check_primitive(std::slice::from_ref(&x), H, |t, v| ops::channel_slice(t, v[0], 2, 5).unwrap()));
    c.push("split4", check_primitive(std::slice::from_ref(&x), H, |t, v| {
        let parts = ops::channel_split4(t, v[0]).unwrap();
        let a = ops::scale(t, parts[1], 2.0);
        let b = ops::mul(t, parts[3], parts[0]).unwrap();
        ops::add(t, a, b).unwrap()
    }));
    c.push("concat", check_primitive(&[x.clone(), y], H, |t, v| ops::channel_concat(t, &[v[1], v[0], v[1]]).unwrap()));
    let img = randn(&[1, 2, 3, 3, 3], 1.0, r);
    c.push("replicate", check_primitive(&[img], H, |t, v| ops::replicate_temporal(t, v[0], 3).unwrap()));
    c.push("reshape", check_primitive(&[x], H, |t, v| ops::reshape(t, v[0], &[1, 2, 72]).unwrap()));
    c.0
}

pub fn spectrum() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(8);
    for (h, w) in [(8, 8), (4, 6), (5, 3)] {
        let x = randn(&[1, 2, 3, h, w], 1.0, r);
        c.push(format!("fft2 {h}x{w}"), check_primitive(&[x], H, |t, v| ops::fft2(t, v[0]).unwrap()));
    }
    let s = rand_away(&[1, 2, 4, 5, 5], 0.1, r);
    c.push("spectrum_magnitude", check_primitive(&[s], H, |t, v| ops::spectrum_magnitude(t, v[0]).unwrap()));
    c.0
}

pub fn threshold_batch_norm() -> Errors {
    let r = &mut rng(9);
    let x = randn(&[2, 2, 3, 4, 4], 2.0, r);
    let scale = randn(&[3], 1.0, r);
    let shift = randn(&[3], 1.0, r);
    let cfg = TdBnConfig::new(1.0, 0.5);
    let err = check_primitive(&[x, scale, shift], H, |t, v| {
        let mut stats = RunningStats {
            mean: vec![0.0; 3],
            var: vec![1.0; 3],
        };
        spiking::tdbn(t, v[0], v[1], v[2], &mut stats, &cfg, true).unwrap()
    });
    vec![("tdbn".into(), err)]
}

pub fn ssim_and_objective() -> Errors {
    let mut c = Cases::new();
    let r = &mut rng(10);
    let pred = uniform01(&[1, 1, 3, 12, 12], r);
    let target = uniform01(&[1, 1, 3, 12, 12], r);
    c.push("ssim", check_primitive(&[pred], H, |t, v| {
        let tg = t.constant(target.clone());
        ssim_loss(t, v[0], tg).unwrap()
    }));
    // whole objective w.r.t. the full-scale prediction, other scales fixed
    // prediction kept at least 0.05 from the target so |·| has no kink within reach
    let gt = uniform01(&[1, 1, 3, 8, 8], r);
    let p = Tensor::from_vec(
        gt.shape().to_vec(),
        gt.data().iter().zip(rand_away(&[192], 0.05, r).data()).map(|(g, o)| g + 0.2 * o).collect(),
    )
    .unwrap();
    let targets = target_pyramid(&gt).unwrap();
    let half = uniform01(&[1, 1, 3, 4, 4], r);
    let quarter = uniform01(&[1, 1, 3, 2, 2], r);
    c.push("objective", check_primitive(&[p], H, |t, v| {
        let preds = MultiScale {
            full: v[0],
            half: t.constant(half.clone()),
            quarter: t.constant(quarter.clone()),
        };
        objective(t, &preds, &targets, &LossWeights::default()).unwrap().0
    }));
    c.0
}

/// Both neurons against their surrogate; judged at the primitive tolerance.
pub fn neurons() -> Errors {
    let mut c = Cases::new();
    let cfg = NeuronConfig::default();
    let x = randn(&[4, 2, 3, 3, 3], 2.0, &mut rng(11)).map(|v| v + 1.0);
    for binary in [false, true] {
        let f = |ctx: &mut Ctx, x: Var| {
            if binary {
                ctx.binary_lif(x, &cfg, "n")
            } else {
                ctx.nilif(x, &cfg, "n")
            }
        };
        let g = check_block(&mut ParamStore::new(), true, &x, 60, 1e-3, 12, &f);
        c.push(if binary { "binary lif" } else { "ni-lif" }, g.input_err);
    }
    c.0
}

pub const PRIMITIVES: [(&str, fn() -> Errors); 11] = [
    ("elementwise", elementwise),
    ("broadcast", broadcast),
    ("conv2d", conv2d),
    ("linear", linear),
    ("pooling", pooling_and_resampling),
    ("reductions", reductions),
    ("shape", shape_ops),
    ("spectrum", spectrum),
    ("tdbn", threshold_batch_norm),
    ("ssim/objective", ssim_and_objective),
    ("neurons", neurons),
];

pub fn env(t: usize) -> BlockEnv {
    BlockEnv::new(NeuronConfig::default(), 1.0, t)
}

/// `2 × 4 × 8 × 8 × 8` currents with a random offset per batch item and
/// channel, so pooled branches see spread-out spike counts.
pub fn block_input(seed: u64) -> Tensor {
    let r = &mut rng(seed);
    let offsets = randn(&[1, 4, 8, 1, 1], 2.0, r).map(|v| v + 1.0);
    let mut x = randn(&[2, 4, 8, 8, 8], 1.5, r);
    for (i, v) in x.data_mut().iter_mut().enumerate() {
        *v += offsets.data()[(i / 64) % 32];
    }
    x
}

pub fn fdm() -> Errors {
    let mut c = Cases::new();
    let mut store = ParamStore::new();
    let fdm = Fdm::new(&mut store, "fdm", &env(2));
    for p in store.iter_mut() {
        p.value = p.value.map(|v| v * 0.7 + 0.2);
    }
    c.block("fdm", check_block(&mut store, true, &block_input(20), 40, 1e-2, 21, &|ctx, x| fdm.forward(ctx, x)));
    c.0
}

pub fn mplb() -> Errors {
    let mut c = Cases::new();
    let mut store = ParamStore::new();
    let m = Mplb::new(&mut store, "mplb", 8, &env(2), &mut rng(22)).unwrap();
    c.block("mplb", check_block(&mut store, true, &block_input(23), 40, 1e-2, 24, &|ctx, x| m.forward(ctx, x)));
    c.0
}

pub fn mda() -> Errors {
    let mut c = Cases::new();
    let mut store = ParamStore::new();
    let m = Mda::new(&mut store, "mda", 8, &env(2), &mut rng(25));
    c.block("mda", check_block(&mut store, true, &block_input(26), 40, 1e-2, 27, &|ctx, x| m.forward(ctx, x)));
    c.0
}

pub fn srb() -> Errors {
    let mut c = Cases::new();
    for (i, toggles) in [Toggles::ALL, Toggles::NONE].into_iter().enumerate() {
        let mut store = ParamStore::new();
        let s = Srb::new(&mut store, "srb", 8, toggles, &env(2), &mut rng(28 + i as u64)).unwrap();
        let g = check_block(&mut store, true, &block_input(29), 40, 1e-2, 30, &|ctx, x| s.forward(ctx, x));
        c.block(&format!("srb {}", if i == 0 { "all" } else { "none" }), g);
    }
    c.0
}

pub fn micro_network() -> Errors {
    // running statistics: at 16 × 16 the globally pooled branches would be
    // normalised over only T·B values
    let mut c = Cases::new();
    let mut store = ParamStore::new();
    let net = Uiesnn::new(NetConfig::micro(), &mut store, 31).unwrap();
    let img = uniform01(&[1, 1, 3, 16, 16], &mut rng(32));
    let g = check_block(&mut store, false, &img, 40, 1e-2, 33, &|ctx, x| {
        let out = net.forward_ctx(ctx, x)?;
        // concatenate all three scales into one objective
        let h = ops::resize_bilinear(&mut ctx.tape, out.half, 16, 16)?;
        let q = ops::resize_bilinear(&mut ctx.tape, out.quarter, 16, 16)?;
        ops::channel_concat(&mut ctx.tape, &[out.full, h, q])
    });
    c.block("micro network", g);
    c.0
}

pub const BLOCKS: [(&str, fn() -> Errors); 5] = [("fdm", fdm), ("mplb", mplb), ("mda", mda), ("srb", srb), ("micro network", micro_network)];
