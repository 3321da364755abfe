mod common;

use common::oracles::network_params;
use common::{randn, rng, uniform01};
use uiesnn::autograd::ParamStore;
use uiesnn::blocks::{BlockEnv, Downsample, Fdm, Mda, Mplb, PatchEmbed, Srb, Toggles, UpsampleBlock};
use uiesnn::layers::Ctx;
use uiesnn::network::{load_checkpoint, save_checkpoint, Checkpoint, NetConfig, Uiesnn};
use uiesnn::spiking::NeuronConfig;
use uiesnn::{Error, Tensor};

fn trainable(store: &ParamStore) -> usize {
    store.iter().filter(|p| p.trainable).map(|p| p.value.numel()).sum()
}

fn small_cfg() -> NetConfig {
    NetConfig {
        timesteps: 2,
        base_channels: 8,
        stage_layout: vec![1, 1, 1, 1, 1, 1],
        ..NetConfig::default()
    }
}

fn zero_heads(net: &Uiesnn, store: &mut ParamStore) {
    for h in &net.heads {
        store.value_mut(h.conv.weight).fill(0.0);
        store.value_mut(h.conv.bias.unwrap()).fill(0.0);
    }
}

#[test]
fn parameter_count_matches_hand_tally() {
    for (layout, t) in [([4, 4, 8, 2, 2, 2], 4), ([2, 2, 4, 1, 1, 1], 4), ([1, 1, 1, 1, 1, 1], 2)] {
        let cfg = NetConfig {
            timesteps: t,
            stage_layout: layout.to_vec(),
            ..NetConfig::default()
        };
        let mut store = ParamStore::new();
        let net = Uiesnn::new(cfg, &mut store, 0).unwrap();
        let want = network_params(16, &layout, t);
        assert_eq!(net.num_params(), want, "{layout:?}");
        assert_eq!(trainable(&store), want);
    }
}

#[test]
fn global_residual_identity() {
    let mut store = ParamStore::new();
    let net = Uiesnn::new(small_cfg(), &mut store, 1).unwrap();
    zero_heads(&net, &mut store);
    let img = uniform01(&[1, 2, 3, 16, 24], &mut rng(2));
    let out = net.forward(&mut store, &img).unwrap();
    assert_eq!(out.full.data(), img.data());
    let mut tape = uiesnn::autograd::Tape::new();
    let v = tape.constant(img.clone());
    let half = uiesnn::ops::resize_bilinear(&mut tape, v, 8, 12).unwrap();
    let quarter = uiesnn::ops::resize_bilinear(&mut tape, v, 4, 6).unwrap();
    assert_eq!(out.half.data(), tape.value(half).data());
    assert_eq!(out.quarter.data(), tape.value(quarter).data());
}

#[test]
fn output_shapes_follow_the_pyramid() {
    let mut store = ParamStore::new();
    let net = Uiesnn::new(small_cfg(), &mut store, 1).unwrap();
    let img = uniform01(&[1, 1, 3, 32, 16], &mut rng(3));
    let out = net.forward(&mut store, &img).unwrap();
    assert_eq!(out.full.shape(), &[1, 1, 3, 32, 16]);
    assert_eq!(out.half.shape(), &[1, 1, 3, 16, 8]);
    assert_eq!(out.quarter.shape(), &[1, 1, 3, 8, 4]);
    assert!(out.full.is_finite());
    let again = net.forward(&mut store, &img).unwrap();
    assert_eq!(out.full.data(), again.full.data());
    let bad = Tensor::zeros(&[1, 1, 3, 18, 16]);
    assert!(matches!(net.forward(&mut store, &bad), Err(Error::Shape(_))));
}

#[test]
fn enhance_handles_any_size() {
    let mut store = ParamStore::new();
    let net = Uiesnn::new(small_cfg(), &mut store, 1).unwrap();
    zero_heads(&net, &mut store);
    let img = uniform01(&[1, 1, 3, 13, 10], &mut rng(4));
    let out = net.enhance(&mut store, &img).unwrap();
    assert_eq!(out.shape(), img.shape());
    assert_eq!(out.data(), img.data());
}

#[test]
fn blocks_preserve_shape() {
    let env = BlockEnv::new(NeuronConfig::default(), 1.0, 2);
    let mut store = ParamStore::new();
    let r = &mut rng(5);
    let c = 8;
    let fdm = Fdm::new(&mut store, "fdm", &env);
    let mplb = Mplb::new(&mut store, "mplb", c, &env, r).unwrap();
    let mda = Mda::new(&mut store, "mda", c, &env, r);
    let srb_all = Srb::new(&mut store, "a", c, Toggles::ALL, &env, r).unwrap();
    let srb_none = Srb::new(&mut store, "n", c, Toggles::NONE, &env, r).unwrap();
    let down = Downsample::new(&mut store, "down", c, &env, r);
    let up = UpsampleBlock::new(&mut store, "up", 2 * c, &env, r).unwrap();
    let embed = PatchEmbed::new(&mut store, "embed", c, &env, r);
    for (h, w) in [(8, 8), (12, 8), (16, 4)] {
        let x = randn(&[2, 2, c, h, w], 2.0, r);
        let mut ctx = Ctx::new(&mut store, true);
        let v = ctx.tape.constant(x);
        let same = [
            fdm.forward(&mut ctx, v).unwrap(),
            mplb.forward(&mut ctx, v).unwrap(),
            mda.forward(&mut ctx, v).unwrap(),
            srb_all.forward(&mut ctx, v).unwrap(),
            srb_none.forward(&mut ctx, v).unwrap(),
        ];
        for s in same {
            assert_eq!(ctx.value(s).shape(), &[2, 2, c, h, w]);
        }
        let d = down.forward(&mut ctx, v).unwrap();
        assert_eq!(ctx.value(d).shape(), &[2, 2, 2 * c, h / 2, w / 2]);
        let u = up.forward(&mut ctx, d).unwrap();
        assert_eq!(ctx.value(u).shape(), &[2, 2, c, h, w]);
        let rgb = ctx.tape.constant(Tensor::zeros(&[2, 2, 3, h, w]));
        let e = embed.forward(&mut ctx, rgb).unwrap();
        assert_eq!(ctx.value(e).shape(), &[2, 2, c, h, w]);
    }
}

#[test]
fn toggles_off_removes_components() {
    let cfg = NetConfig {
        toggles: Toggles::NONE,
        ..small_cfg()
    };
    let mut store = ParamStore::new();
    let net = Uiesnn::new(cfg, &mut store, 0).unwrap();
    for p in store.iter() {
        assert!(!p.name.contains(".mplb.") && !p.name.contains(".fdm.") && !p.name.contains(".mda."), "{}", p.name);
    }
    assert!(net.srbs().all(|s| s.mplb.is_none() && s.fdm.is_none() && s.mda.is_none()));
    let mut full = ParamStore::new();
    let net_full = Uiesnn::new(small_cfg(), &mut full, 0).unwrap();
    assert!(net_full.num_params() > net.num_params());
    assert_eq!(trainable(&store), net.num_params());
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.uies");
    let mut store = ParamStore::new();
    let net = Uiesnn::new(small_cfg(), &mut store, 9).unwrap();
    for p in store.iter_mut() {
        p.value = p.value.map(|v| v * 1.01 + 0.001);
    }
    let img = uniform01(&[1, 1, 3, 16, 16], &mut rng(6));
    let before = net.forward(&mut store, &img).unwrap();
    save_checkpoint(&path, &net, &store, 17).unwrap();
    let (net2, mut store2, step) = load_checkpoint(&path).unwrap();
    assert_eq!(step, 17);
    assert_eq!(net2.config(), net.config());
    for (a, b) in store.iter().zip(store2.iter()) {
        assert_eq!(a.name, b.name);
        assert!(a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let after = net2.forward(&mut store2, &img).unwrap();
    for (a, b) in before.as_array().into_iter().zip(after.as_array()) {
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn edited_config_is_rejected_naming_the_tensor() {
    let mut store = ParamStore::new();
    let net = Uiesnn::new(small_cfg(), &mut store, 0).unwrap();
    let mut ck = Checkpoint::capture(&net, &store, 0);
    ck.config.base_channels = 12;
    let parsed = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
    match parsed.instantiate() {
        Err(Error::IncompatibleCheckpoint { tensor, .. }) => assert!(tensor.starts_with("embed"), "{tensor}"),
        other => panic!("expected incompatible checkpoint, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn truncated_checkpoint_is_a_format_error() {
    let mut store = ParamStore::new();
    let net = Uiesnn::new(small_cfg(), &mut store, 0).unwrap();
    let bytes = Checkpoint::capture(&net, &store, 3).to_bytes();
    for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Format { .. })));
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format { .. })));
    let mut target = ParamStore::new();
    let other = Uiesnn::new(small_cfg(), &mut target, 5).unwrap();
    let snapshot: Vec<Tensor> = target.iter().map(|p| p.value.clone()).collect();
    let mut ck = Checkpoint::capture(&net, &store, 0);
    ck.tensors.last_mut().unwrap().1 = Tensor::zeros(&[7]);
    assert!(ck.apply(&mut target).is_err());
    assert!(target.iter().zip(&snapshot).all(|(p, s)| p.value == *s));
    drop(other);
}
