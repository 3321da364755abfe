//! Three-level spiking encoder-decoder with multi-scale input injection and
//! three prediction heads.
//!
//! Images travel as rank-5 tensors `1 × B × 3 × H × W`. The image is
//! replicated over `T` steps and embedded; encoder level `l` runs
//! `stage_layout[l]` residual blocks at `base·2^l` channels with spike-driven
//! downsampling in between. Levels 2 and 3 also receive the bilinearly
//! resized image, embedded by a 3×3 conv to `base/2` channels, concatenated
//! and projected back by a 1×1 conv + tdBN. The decoder mirrors the encoder:
//! spike-driven upsampling, skip concatenation with a 1×1 conv + tdBN fusion
//! and `stage_layout[3..6]` blocks. Each head averages over time, applies a
//! 3×3 conv to RGB and adds the resized input image.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION, MAGIC};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{ParamStore, Var};
use crate::blocks::{BlockEnv, Downsample, PatchEmbed, Srb, Toggles, UpsampleBlock};
use crate::energy::LayerKind;
use crate::error::{Error, Result};
use crate::layers::{Conv2d, ConvBn, Ctx, Probe};
use crate::ops;
use crate::spiking::NeuronConfig;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub timesteps: usize,
    pub base_channels: usize,
    pub stage_layout: Vec<usize>,
    pub neuron: NeuronConfig,
    pub alpha_bn: f32,
    pub toggles: Toggles,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            timesteps: 4,
            base_channels: 16,
            stage_layout: vec![4, 4, 8, 2, 2, 2],
            neuron: NeuronConfig::default(),
            alpha_bn: 1.0,
            toggles: Toggles::ALL,
        }
    }
}

impl NetConfig {
    /// Small configuration used for desk-scale training.
    pub fn micro() -> Self {
        Self {
            stage_layout: vec![2, 2, 4, 1, 1, 1],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 {
            return Err(Error::param("timesteps must be at least 1"));
        }
        if self.base_channels == 0 || !self.base_channels.is_multiple_of(4) {
            return Err(Error::param(format!(
                "base_channels must be a positive multiple of 4, got {}",
                self.base_channels
            )));
        }
        if self.stage_layout.len() != 6 {
            return Err(Error::param(format!(
                "stage_layout needs exactly 6 entries, got {}",
                self.stage_layout.len()
            )));
        }
        if !(self.alpha_bn > 0.0) {
            return Err(Error::param("alpha_bn must be positive"));
        }
        self.neuron.validate()
    }

    pub fn env(&self) -> BlockEnv {
        BlockEnv::new(self.neuron, self.alpha_bn, self.timesteps)
    }

    pub fn level_channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

/// Resized image embedding fed into encoder levels 2 and 3.
#[derive(Clone, Debug)]
pub struct Injection {
    pub embed: Conv2d,
    pub project: ConvBn,
}

impl Injection {
    fn num_params(&self) -> usize {
        self.embed.num_params() + self.project.num_params()
    }

    fn forward(&self, ctx: &mut Ctx, x: Var, img: Var, timesteps: usize) -> Result<Var> {
        let e = self.embed.forward(ctx, img)?;
        let e = ops::replicate_temporal(&mut ctx.tape, e, timesteps)?;
        let cat = ops::channel_concat(&mut ctx.tape, &[x, e])?;
        self.project.forward(ctx, cat)
    }
}

/// Head weights start this fraction of the default init so an untrained
/// model is close to the identity map.
pub const HEAD_INIT_SCALE: f32 = 0.01;

/// Temporal mean, 3×3 conv to RGB, plus the resized input image.
#[derive(Clone, Debug)]
pub struct Head {
    pub conv: Conv2d,
}

impl Head {
    fn forward(&self, ctx: &mut Ctx, x: Var, img: Var) -> Result<Var> {
        let m = ops::mean_axes(&mut ctx.tape, x, [true, false, false, false, false])?;
        let r = self.conv.forward(ctx, m)?;
        ops::add(&mut ctx.tape, r, img)
    }
}

/// Predictions at full, half and quarter resolution, each `1 × B × 3 × h × w`.
#[derive(Clone, Debug)]
pub struct MultiScale<V> {
    pub full: V,
    pub half: V,
    pub quarter: V,
}

pub type MultiScaleOutput = MultiScale<Tensor>;

impl<V> MultiScale<V> {
    pub fn as_array(&self) -> [&V; 3] {
        [&self.full, &self.half, &self.quarter]
    }
}

#[derive(Clone, Debug)]
pub struct Uiesnn {
    config: NetConfig,
    pub embed: PatchEmbed,
    pub encoders: [Vec<Srb>; 3],
    pub downs: [Downsample; 2],
    pub injections: [Injection; 2],
    pub ups: [UpsampleBlock; 2],
    pub fusions: [ConvBn; 2],
    /// Decoder stacks for levels 3, 2, 1.
    pub decoders: [Vec<Srb>; 3],
    /// Heads for levels 3, 2, 1.
    pub heads: [Head; 3],
}

impl Uiesnn {
    /// Builds the model and registers its parameters, initialised from `seed`.
    pub fn new(config: NetConfig, store: &mut ParamStore, seed: u64) -> Result<Self> {
        config.validate()?;
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let env = config.env();
        let ch = |l| config.level_channels(l);
        let spike = LayerKind::SpikeDriven;
        let stack = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, n: usize, c: usize| {
            (0..n)
                .map(|i| Srb::new(store, &format!("{name}.{i}"), c, config.toggles, &env, rng))
                .collect::<Result<Vec<_>>>()
        };
        let embed = PatchEmbed::new(store, "embed", ch(0), &env, rng);
        let enc1 = stack(store, rng, "enc1", config.stage_layout[0], ch(0))?;
        let down1 = Downsample::new(store, "down1", ch(0), &env, rng);
        let injection = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, c: usize| {
            let e = config.base_channels / 2;
            Injection {
                embed: Conv2d::new(store, &format!("{name}.embed"), 3, e, 3, 1, false, LayerKind::Dense, rng),
                project: ConvBn::new(store, &format!("{name}.project"), c + e, c, 1, 1, spike, env.bn, rng),
            }
        };
        let inject2 = injection(store, rng, "inject2", ch(1));
        let enc2 = stack(store, rng, "enc2", config.stage_layout[1], ch(1))?;
        let down2 = Downsample::new(store, "down2", ch(1), &env, rng);
        let inject3 = injection(store, rng, "inject3", ch(2));
        let enc3 = stack(store, rng, "enc3", config.stage_layout[2], ch(2))?;
        let head = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, c: usize| {
            let conv = Conv2d::new(store, name, c, 3, 3, 1, true, LayerKind::Dense, rng);
            let w = store.value_mut(conv.weight);
            *w = w.map(|v| v * HEAD_INIT_SCALE);
            Head { conv }
        };
        let dec3 = stack(store, rng, "dec3", config.stage_layout[3], ch(2))?;
        let head3 = head(store, rng, "head3", ch(2));
        let up3 = UpsampleBlock::new(store, "up3", ch(2), &env, rng)?;
        let fuse2 = ConvBn::new(store, "fuse2", 2 * ch(1), ch(1), 1, 1, spike, env.bn, rng);
        let dec2 = stack(store, rng, "dec2", config.stage_layout[4], ch(1))?;
        let head2 = head(store, rng, "head2", ch(1));
        let up2 = UpsampleBlock::new(store, "up2", ch(1), &env, rng)?;
        let fuse1 = ConvBn::new(store, "fuse1", 2 * ch(0), ch(0), 1, 1, spike, env.bn, rng);
        let dec1 = stack(store, rng, "dec1", config.stage_layout[5], ch(0))?;
        let head1 = head(store, rng, "head1", ch(0));
        Ok(Self {
            config,
            embed,
            encoders: [enc1, enc2, enc3],
            downs: [down1, down2],
            injections: [inject2, inject3],
            ups: [up3, up2],
            fusions: [fuse2, fuse1],
            decoders: [dec3, dec2, dec1],
            heads: [head3, head2, head1],
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    /// Trainable scalar count, tallied block by block.
    pub fn num_params(&self) -> usize {
        let srbs: usize = self
            .encoders
            .iter()
            .chain(&self.decoders)
            .flatten()
            .map(Srb::num_params)
            .sum();
        self.embed.num_params()
            + srbs
            + self.downs.iter().map(Downsample::num_params).sum::<usize>()
            + self.injections.iter().map(Injection::num_params).sum::<usize>()
            + self.ups.iter().map(UpsampleBlock::num_params).sum::<usize>()
            + self.fusions.iter().map(ConvBn::num_params).sum::<usize>()
            + self.heads.iter().map(|h| h.conv.num_params()).sum::<usize>()
    }

    /// Every residual block with its name, encoder first.
    pub fn srbs(&self) -> impl Iterator<Item = &Srb> {
        self.encoders.iter().chain(&self.decoders).flatten()
    }

    pub fn check_input(&self, d: crate::tensor::Dims5) -> Result<()> {
        if d.t != 1 || d.c != 3 {
            return Err(Error::shape(format!("expected a 1 × B × 3 × H × W image, got {d}")));
        }
        if !d.h.is_multiple_of(4) || !d.w.is_multiple_of(4) {
            return Err(Error::shape(format!("image size {}×{} is not divisible by 4", d.h, d.w)));
        }
        Ok(())
    }

    /// Records the full forward on `ctx.tape` for an image node.
    pub fn forward_ctx(&self, ctx: &mut Ctx, img: Var) -> Result<MultiScale<Var>> {
        let d = ctx.value(img).dims5()?;
        self.check_input(d)?;
        let t = self.config.timesteps;
        let img2 = ops::resize_bilinear(&mut ctx.tape, img, d.h / 2, d.w / 2)?;
        let img4 = ops::resize_bilinear(&mut ctx.tape, img, d.h / 4, d.w / 4)?;

        let seq = ops::replicate_temporal(&mut ctx.tape, img, t)?;
        let mut x = self.embed.forward(ctx, seq)?;
        let mut skips = Vec::with_capacity(2);
        for level in 0..3 {
            if level > 0 {
                x = self.downs[level - 1].forward(ctx, x)?;
                let small = if level == 1 { img2 } else { img4 };
                x = self.injections[level - 1].forward(ctx, x, small, t)?;
            }
            for b in &self.encoders[level] {
                x = b.forward(ctx, x)?;
            }
            if level < 2 {
                skips.push(x);
            }
        }

        let mut outs = Vec::with_capacity(3);
        let images = [img4, img2, img];
        for i in 0..3 {
            if i > 0 {
                x = self.ups[i - 1].forward(ctx, x)?;
                let skip = skips.pop().expect("one skip per upsampling");
                let cat = ops::channel_concat(&mut ctx.tape, &[x, skip])?;
                x = self.fusions[i - 1].forward(ctx, cat)?;
            }
            for b in &self.decoders[i] {
                x = b.forward(ctx, x)?;
            }
            outs.push(self.heads[i].forward(ctx, x, images[i])?);
        }
        Ok(MultiScale {
            full: outs[2],
            half: outs[1],
            quarter: outs[0],
        })
    }

    /// Eval-mode forward returning plain tensors.
    pub fn forward(&self, params: &mut ParamStore, img: &Tensor) -> Result<MultiScaleOutput> {
        Ok(self.forward_probed(params, img, Probe::new())?.0)
    }

    /// Eval-mode forward with instrumentation.
    pub fn forward_probed(&self, params: &mut ParamStore, img: &Tensor, probe: Probe) -> Result<(MultiScaleOutput, Probe)> {
        self.check_input(img.dims5()?)?;
        let mut ctx = Ctx::new(params, false).with_probe(probe);
        let x = ctx.tape.constant(img.clone());
        let out = self.forward_ctx(&mut ctx, x)?;
        let get = |v: Var| ctx.value(v).clone();
        let res = MultiScale {
            full: get(out.full),
            half: get(out.half),
            quarter: get(out.quarter),
        };
        Ok((res, ctx.probe.take().unwrap_or_default()))
    }

    /// Full-resolution restoration of an image of any size, reflect-padding
    /// to a multiple of 4 and cropping back. Output is clamped to `[0, 1]`.
    pub fn enhance(&self, params: &mut ParamStore, img: &Tensor) -> Result<Tensor> {
        let d = img.dims5()?;
        let (ph, pw) = (d.h.div_ceil(4) * 4, d.w.div_ceil(4) * 4);
        let padded = if (ph, pw) == (d.h, d.w) {
            img.clone()
        } else {
            reflect_pad(img, ph, pw)?
        };
        let out = self.forward(params, &padded)?.full;
        let mut cropped = Vec::with_capacity(d.numel());
        for plane in out.data().chunks_exact(ph * pw) {
            for y in 0..d.h {
                cropped.extend(plane[y * pw..y * pw + d.w].iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Tensor::from_vec5(d, cropped)
    }
}

/// Reflect-pads every plane on the bottom and right to `ph × pw`.
pub fn reflect_pad(x: &Tensor, ph: usize, pw: usize) -> Result<Tensor> {
    let d = x.dims5()?;
    if ph < d.h || pw < d.w {
        return Err(Error::shape(format!("cannot reflect-pad {}×{} to {ph}×{pw}", d.h, d.w)));
    }
    let mut out = Vec::with_capacity(d.frames() * d.c * ph * pw);
    for plane in x.data().chunks_exact(d.plane()) {
        for y in 0..ph {
            let sy = ops::reflect_index(y as isize, d.h);
            for xx in 0..pw {
                out.push(plane[sy * d.w + ops::reflect_index(xx as isize, d.w)]);
            }
        }
    }
    Tensor::from_vec5(d.with_hw(ph, pw), out)
}
