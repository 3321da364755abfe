//! Finite-difference gradient checks; the suites live in `common::gradsuite`.

mod common;

use common::gradsuite::{self, Errors, BLOCK_TOL, PRIM_TOL};
use common::gradsuite::{block_input, env};
use common::rng;
use uiesnn::autograd::ParamStore;
use uiesnn::blocks::{Srb, Toggles};
use uiesnn::ops;

fn within(errors: Errors, tol: f64) {
    for (name, err) in errors {
        assert!(err < tol, "{name}: relative error {err:.3e}");
    }
}

#[test]
fn elementwise_ops() {
    within(gradsuite::elementwise(), PRIM_TOL);
}

#[test]
fn broadcast_ops() {
    within(gradsuite::broadcast(), PRIM_TOL);
}

#[test]
fn conv2d_variants() {
    within(gradsuite::conv2d(), PRIM_TOL);
}

#[test]
fn linear_layer() {
    within(gradsuite::linear(), PRIM_TOL);
}

#[test]
fn pooling_and_resampling() {
    within(gradsuite::pooling_and_resampling(), PRIM_TOL);
}

#[test]
fn reductions() {
    within(gradsuite::reductions(), PRIM_TOL);
}

#[test]
fn shape_ops() {
    within(gradsuite::shape_ops(), PRIM_TOL);
}

#[test]
fn spectrum() {
    within(gradsuite::spectrum(), PRIM_TOL);
}

#[test]
fn threshold_batch_norm() {
    within(gradsuite::threshold_batch_norm(), PRIM_TOL);
}

#[test]
fn ssim_and_objective() {
    within(gradsuite::ssim_and_objective(), PRIM_TOL);
}

#[test]
fn neurons_follow_their_surrogate() {
    within(gradsuite::neurons(), PRIM_TOL);
}

#[test]
fn fdm_frozen_spikes() {
    within(gradsuite::fdm(), BLOCK_TOL);
}

#[test]
fn mplb_frozen_spikes() {
    within(gradsuite::mplb(), BLOCK_TOL);
}

#[test]
fn mda_frozen_spikes() {
    within(gradsuite::mda(), BLOCK_TOL);
}

#[test]
fn srb_frozen_spikes() {
    within(gradsuite::srb(), BLOCK_TOL);
}

#[test]
fn micro_network_frozen_spikes() {
    within(gradsuite::micro_network(), BLOCK_TOL);
}

#[test]
fn every_srb_parameter_receives_gradient() {
    for seed in 0..5u64 {
        let mut store = ParamStore::new();
        let s = Srb::new(&mut store, "srb", 8, Toggles::ALL, &env(2), &mut rng(40 + seed)).unwrap();
        let input = block_input(50 + seed);
        let mut ctx = uiesnn::layers::Ctx::new(&mut store, true);
        let x = ctx.tape.constant(input);
        let y = s.forward(&mut ctx, x).unwrap();
        let loss = ops::mean_abs(&mut ctx.tape, y);
        let mut tape = std::mem::take(&mut ctx.tape);
        drop(ctx);
        tape.backward(loss, &mut store).unwrap();
        for p in store.iter().filter(|p| p.trainable) {
            assert!(p.grad.data().iter().any(|&g| g != 0.0), "seed {seed}: `{}` has zero gradient", p.name);
        }
    }
}
