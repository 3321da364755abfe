//! Parameterised layers and the forward context that threads the tape,
//! parameter store, training flag and instrumentation through a model.

use rand::Rng;

use crate::autograd::{ParamId, ParamStore, Tape, Var};
use crate::energy::LayerKind;
use crate::error::Result;
use crate::ops;
use crate::spiking::{self, FreezeMode, NeuronConfig, RunningStats, TdBnConfig};
use crate::tensor::Tensor;

/// One convolution executed during an instrumented forward.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvRecord {
    pub name: String,
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub h_out: usize,
    pub w_out: usize,
    /// Fraction of nonzero elements in the tensor fed to the convolution.
    pub input_rate: f64,
}

/// One neuron call: its label and the fraction of nonzero outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRecord {
    pub label: String,
    pub rate: f64,
}

/// Optional instrumentation collected during a forward pass.
#[derive(Debug, Default)]
pub struct Probe {
    pub convs: Vec<ConvRecord>,
    pub spikes: Vec<SpikeRecord>,
    /// Neuron outputs whose label starts with this prefix are kept whole.
    pub capture_prefix: Option<String>,
    pub captured: Vec<(String, Tensor)>,
}

impl Probe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn capturing(prefix: impl Into<String>) -> Self {
        Self {
            capture_prefix: Some(prefix.into()),
            ..Self::default()
        }
    }
}

pub struct Ctx<'a> {
    pub tape: Tape,
    pub params: &'a mut ParamStore,
    pub training: bool,
    pub freeze: FreezeMode,
    pub probe: Option<Probe>,
}

impl<'a> Ctx<'a> {
    pub fn new(params: &'a mut ParamStore, training: bool) -> Self {
        Self {
            tape: Tape::new(),
            params,
            training,
            freeze: FreezeMode::Off,
            probe: None,
        }
    }

    pub fn with_probe(mut self, probe: Probe) -> Self {
        self.probe = Some(probe);
        self
    }

    pub fn with_freeze(mut self, freeze: FreezeMode) -> Self {
        self.freeze = freeze;
        self
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.tape.param(self.params, id)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.tape.value(v)
    }

    pub fn nilif(&mut self, x: Var, cfg: &NeuronConfig, label: &str) -> Result<Var> {
        let s = spiking::nilif(&mut self.tape, x, cfg, &mut self.freeze, label)?;
        self.observe(s, label);
        Ok(s)
    }

    pub fn binary_lif(&mut self, x: Var, cfg: &NeuronConfig, label: &str) -> Result<Var> {
        let s = spiking::binary_lif(&mut self.tape, x, cfg, &mut self.freeze, label)?;
        self.observe(s, label);
        Ok(s)
    }

    fn observe(&mut self, s: Var, label: &str) {
        let Some(probe) = self.probe.as_mut() else { return };
        let v = self.tape.value(s);
        probe.spikes.push(SpikeRecord {
            label: label.to_string(),
            rate: v.nonzero_fraction(),
        });
        if probe.capture_prefix.as_deref().is_some_and(|p| label.starts_with(p)) {
            probe.captured.push((label.to_string(), v.clone()));
        }
    }
}

fn uniform(shape: &[usize], bound: f32, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::from_vec(shape.to_vec(), data).expect("init shape")
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub name: String,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub kind: LayerKind,
}

impl Conv2d {
    /// `k × k` convolution with "same" padding for stride 1.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        bias: bool,
        kind: LayerKind,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = (1.0 / (c_in * k * k) as f32).sqrt();
        let weight = store.add(format!("{name}.weight"), uniform(&[c_out, c_in, k, k], bound, rng), true);
        let bias = bias.then(|| store.add(format!("{name}.bias"), Tensor::zeros(&[1, 1, c_out, 1, 1]), true));
        Self {
            name: name.to_string(),
            weight,
            bias,
            c_in,
            c_out,
            k,
            stride,
            pad: k / 2,
            kind,
        }
    }

    pub fn num_params(&self) -> usize {
        self.c_out * self.c_in * self.k * self.k + if self.bias.is_some() { self.c_out } else { 0 }
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let w = ctx.param(self.weight);
        let mut y = ops::conv2d(&mut ctx.tape, x, w, self.stride, self.pad)?;
        if let Some(b) = self.bias {
            let bv = ctx.param(b);
            y = ops::add_bcast(&mut ctx.tape, y, bv)?;
        }
        if let Some(probe) = ctx.probe.as_mut() {
            let d = ctx.tape.value(y).dims5()?;
            probe.convs.push(ConvRecord {
                name: self.name.clone(),
                kind: self.kind,
                c_in: self.c_in,
                c_out: self.c_out,
                k: self.k,
                h_out: d.h,
                w_out: d.w,
                input_rate: ctx.tape.value(x).nonzero_fraction(),
            });
        }
        Ok(y)
    }
}

#[derive(Clone, Debug)]
pub struct TdBn {
    pub scale: ParamId,
    pub shift: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub cfg: TdBnConfig,
}

impl TdBn {
    pub fn new(store: &mut ParamStore, name: &str, c: usize, cfg: TdBnConfig) -> Self {
        Self {
            scale: store.add(format!("{name}.scale"), Tensor::full(&[c], 1.0), true),
            shift: store.add(format!("{name}.shift"), Tensor::zeros(&[c]), true),
            running_mean: store.add(format!("{name}.running_mean"), Tensor::zeros(&[c]), false),
            running_var: store.add(format!("{name}.running_var"), Tensor::full(&[c], 1.0), false),
            cfg,
        }
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let mut stats = RunningStats {
            mean: ctx.params.value(self.running_mean).data().to_vec(),
            var: ctx.params.value(self.running_var).data().to_vec(),
        };
        let (s, b) = (ctx.param(self.scale), ctx.param(self.shift));
        let y = spiking::tdbn(&mut ctx.tape, x, s, b, &mut stats, &self.cfg, ctx.training)?;
        if ctx.training {
            ctx.params.value_mut(self.running_mean).data_mut().copy_from_slice(&stats.mean);
            ctx.params.value_mut(self.running_var).data_mut().copy_from_slice(&stats.var);
        }
        Ok(y)
    }
}

/// Convolution followed by tdBN.
#[derive(Clone, Debug)]
pub struct ConvBn {
    pub conv: Conv2d,
    pub bn: TdBn,
}

impl ConvBn {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        kind: LayerKind,
        bn: TdBnConfig,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            conv: Conv2d::new(store, &format!("{name}.conv"), c_in, c_out, k, stride, false, kind, rng),
            bn: TdBn::new(store, &format!("{name}.bn"), c_out, bn),
        }
    }

    pub fn num_params(&self) -> usize {
        self.conv.num_params() + 2 * self.conv.c_out
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let y = self.conv.forward(ctx, x)?;
        self.bn.forward(ctx, y)
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / fan_in as f32).sqrt();
        Self {
            weight: store.add(format!("{name}.weight"), uniform(&[fan_out, fan_in], bound, rng), true),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]), true),
            fan_in,
            fan_out,
        }
    }

    pub fn num_params(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }

    /// Applies the layer to a `1 × fan_in` row.
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let (w, b) = (ctx.param(self.weight), ctx.param(self.bias));
        ops::linear(&mut ctx.tape, x, w, b)
    }
}
