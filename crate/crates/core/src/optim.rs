//! Adam and learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::autograd::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    /// L2 penalty added to the gradient.
    pub weight_decay: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::param(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::param("eps must be positive and weight_decay non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrDecay {
    #[default]
    Constant,
    /// Half-cosine from the base rate to zero over the run.
    Cosine,
}

impl LrDecay {
    /// Rate for zero-based iteration `iter` of `total`.
    pub fn lr_at(self, base: f32, iter: usize, total: usize) -> f32 {
        match self {
            LrDecay::Constant => base,
            LrDecay::Cosine => {
                let p = iter as f64 / total.max(1) as f64;
                (base as f64 * 0.5 * (1.0 + (std::f64::consts::PI * p).cos())) as f32
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(LrDecay::Constant),
            "cosine" => Some(LrDecay::Cosine),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LrDecay::Constant => "constant",
            LrDecay::Cosine => "cosine",
        }
    }
}

/// Adam over the trainable tensors of a [`ParamStore`]; buffers are skipped.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros = |p: &crate::autograd::Param| if p.trainable { vec![0.0; p.value.numel()] } else { Vec::new() };
        Self {
            config,
            m: store.iter().map(zeros).collect(),
            v: store.iter().map(zeros).collect(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update with learning rate `lr` using the gradients held in `store`.
    pub fn step(&mut self, store: &mut ParamStore, lr: f32) {
        self.steps += 1;
        let c = self.config;
        let bc1 = 1.0 - (c.beta1 as f64).powi(self.steps as i32);
        let bc2 = 1.0 - (c.beta2 as f64).powi(self.steps as i32);
        let step_size = (lr as f64 / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        for (i, p) in store.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let grads = p.grad.data().to_vec();
            for (j, w) in p.value.data_mut().iter_mut().enumerate() {
                let g = grads[j] + c.weight_decay * *w;
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                *w -= step_size * m[j] / (v[j].sqrt() / bc2_sqrt + c.eps);
            }
        }
    }
}
