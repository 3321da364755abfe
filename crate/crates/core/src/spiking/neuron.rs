//! Leaky integrate-and-fire dynamics over the leading time axis.
//!
//! Both neurons share one membrane recursion
//!
//! ```text
//! μ_t = γ·(μ_{t−1} − v_th·m_{t−1}) + U_t,   μ_0 = m_0 = 0
//! ```
//!
//! where `m_t` is the integer spike count fired at step `t`. The NI-LIF
//! neuron fires `m_t = clamp(⌊μ_t / v_th⌋, 0, D)` and emits `m_t / D`; the
//! binary indicator neuron fires `m_t = 1[μ_t ≥ v_th]`. Resetting by
//! `v_th·m_t` keeps the membrane in membrane units while downstream layers
//! see the normalised level.
//!
//! Backward uses full back-propagation through time with a surrogate for
//! `dm/dμ`: straight-through `1/v_th` inside `[0, D·v_th]` for NI-LIF, the
//! scaled logistic derivative for the binary neuron.

use crate::autograd::{BackwardOp, Tape, Var};
use crate::error::{Error, Result};
use crate::ops::logistic;
use crate::tensor::Tensor;

/// Neuron hyperparameters shared by every spiking layer of a model.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NeuronConfig {
    /// Membrane decay `γ ∈ (0, 1]`.
    pub gamma: f32,
    pub v_th: f32,
    /// Quantisation levels `D` of the multi-level neuron.
    pub d_levels: u32,
    /// Sharpness of the sigmoid surrogate.
    pub surrogate_alpha: f32,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            v_th: 1.0,
            d_levels: 4,
            surrogate_alpha: 4.0,
        }
    }
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.v_th > 0.0) {
            return Err(Error::param(format!("v_th must be positive, got {}", self.v_th)));
        }
        if self.d_levels == 0 {
            return Err(Error::param("d_levels must be at least 1"));
        }
        if !(self.surrogate_alpha > 0.0) {
            return Err(Error::param("surrogate_alpha must be positive"));
        }
        Ok(())
    }
}

/// `α·σ(αx)·(1 − σ(αx))`, the derivative of `σ(αx)`.
pub fn surrogate_grad(x: f32, alpha: f32) -> f32 {
    let s = logistic(alpha * x.abs());
    alpha * s * (1.0 - s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Multi,
    Binary,
}

/// How the spike nonlinearity is evaluated on a forward pass.
///
/// `Record` runs the true forward and stores, per neuron call, the surrogate
/// slope `s` at every element and step together with the offset `m − s·μ`.
/// `Replay` replaces the spike function by the affine map `s·μ + offset`,
/// which reproduces the recorded spikes at the recording point and whose
/// exact derivative is the surrogate. Finite differences taken in replay
/// mode therefore check the surrogate-defined backward.
#[derive(Debug, Default)]
pub enum FreezeMode {
    #[default]
    Off,
    Record(Vec<Tensor>),
    Replay { residuals: Vec<Tensor>, cursor: usize },
}

impl FreezeMode {
    pub fn into_residuals(self) -> Vec<Tensor> {
        match self {
            FreezeMode::Record(r) | FreezeMode::Replay { residuals: r, .. } => r,
            FreezeMode::Off => Vec::new(),
        }
    }

    pub fn replay(residuals: Vec<Tensor>) -> Self {
        FreezeMode::Replay {
            residuals,
            cursor: 0,
        }
    }
}

struct Simulation {
    out: Vec<f32>,
    /// `dm_t/dμ_t` at every element and step.
    slope: Vec<f32>,
    /// Recorded `(offset, slope)` pairs.
    residual: Option<(Vec<f32>, Vec<f32>)>,
}

fn hard(kind: Kind, cfg: &NeuronConfig, mu: f32) -> f32 {
    match kind {
        Kind::Multi => (mu / cfg.v_th).clamp(0.0, cfg.d_levels as f32).floor(),
        Kind::Binary => {
            if mu >= cfg.v_th {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn slope(kind: Kind, cfg: &NeuronConfig, mu: f32) -> f32 {
    match kind {
        Kind::Multi => {
            let r = mu / cfg.v_th;
            if (0.0..=cfg.d_levels as f32).contains(&r) {
                1.0 / cfg.v_th
            } else {
                0.0
            }
        }
        Kind::Binary => surrogate_grad(mu - cfg.v_th, cfg.surrogate_alpha),
    }
}

fn simulate(
    u: &[f32],
    steps: usize,
    kind: Kind,
    cfg: &NeuronConfig,
    replay: Option<(&[f32], &[f32])>,
    record: bool,
) -> Simulation {
    let n = u.len() / steps;
    let norm = match kind {
        Kind::Multi => 1.0 / cfg.d_levels as f32,
        Kind::Binary => 1.0,
    };
    let mut mu = vec![0.0f32; n];
    let mut fired = vec![0.0f32; n];
    let mut out = vec![0.0f32; u.len()];
    let mut slopes = vec![0.0f32; u.len()];
    let mut residual = record.then(|| (vec![0.0f32; u.len()], vec![0.0f32; u.len()]));
    for t in 0..steps {
        let base = t * n;
        for i in 0..n {
            let m_prev = fired[i];
            let v = cfg.gamma * (mu[i] - cfg.v_th * m_prev) + u[base + i];
            mu[i] = v;
            let (m, s) = match replay {
                Some((off, sl)) => (sl[base + i] * v + off[base + i], sl[base + i]),
                None => (hard(kind, cfg, v), slope(kind, cfg, v)),
            };
            if let Some((off, sl)) = residual.as_mut() {
                off[base + i] = m - s * v;
                sl[base + i] = s;
            }
            fired[i] = m;
            out[base + i] = m * norm;
            slopes[base + i] = s;
        }
    }
    Simulation {
        out,
        slope: slopes,
        residual,
    }
}

struct NeuronOp {
    steps: usize,
    gamma: f32,
    v_th: f32,
    norm: f32,
    slope: Vec<f32>,
}

impl BackwardOp for NeuronOp {
    fn backward(&self, g: &Tensor, _: &[&Tensor], _: &Tensor, _: &[bool]) -> Vec<Option<Tensor>> {
        let gd = g.data();
        let n = gd.len() / self.steps;
        let mut gu = vec![0.0f32; gd.len()];
        let mut carry = vec![0.0f32; n];
        for t in (0..self.steps).rev() {
            let base = t * n;
            for i in 0..n {
                let s = self.slope[base + i];
                let delta = gd[base + i] * self.norm * s + carry[i] * self.gamma * (1.0 - self.v_th * s);
                gu[base + i] = delta;
                carry[i] = delta;
            }
        }
        vec![Some(Tensor::from_vec(g.shape().to_vec(), gu).unwrap())]
    }
}

fn run(
    tape: &mut Tape,
    x: Var,
    cfg: &NeuronConfig,
    kind: Kind,
    freeze: &mut FreezeMode,
    label: &str,
) -> Result<Var> {
    let d = tape.value(x).dims5()?;
    let u = tape.value(x);
    if !u.is_finite() {
        return Err(Error::Numeric {
            layer: label.to_string(),
        });
    }
    let record = matches!(freeze, FreezeMode::Record(_));
    let replay = match freeze {
        FreezeMode::Replay { residuals, cursor } => {
            let (off, sl) = match (residuals.get(*cursor), residuals.get(*cursor + 1)) {
                (Some(o), Some(s)) => (o, s),
                _ => return Err(Error::Usage(format!("no recorded spike pattern left for {label}"))),
            };
            if off.shape() != u.shape() || sl.shape() != u.shape() {
                return Err(Error::Usage(format!("recorded spike pattern for {label} has the wrong shape")));
            }
            *cursor += 2;
            Some((off.data(), sl.data()))
        }
        _ => None,
    };
    let sim = simulate(u.data(), d.t, kind, cfg, replay, record);
    if let (FreezeMode::Record(list), Some((off, sl))) = (freeze, sim.residual) {
        list.push(Tensor::from_vec5(d, off)?);
        list.push(Tensor::from_vec5(d, sl)?);
    }
    let norm = match kind {
        Kind::Multi => 1.0 / cfg.d_levels as f32,
        Kind::Binary => 1.0,
    };
    let out = Tensor::from_vec5(d, sim.out)?;
    Ok(tape.push(
        out,
        vec![x],
        Box::new(NeuronOp {
            steps: d.t,
            gamma: cfg.gamma,
            v_th: cfg.v_th,
            norm,
            slope: sim.slope,
        }),
    ))
}

/// Multi-level (NI-LIF) neuron on a `T × B × C × H × W` input current.
pub fn nilif(tape: &mut Tape, x: Var, cfg: &NeuronConfig, freeze: &mut FreezeMode, label: &str) -> Result<Var> {
    run(tape, x, cfg, Kind::Multi, freeze, label)
}

/// Binary indicator LIF neuron.
pub fn binary_lif(
    tape: &mut Tape,
    x: Var,
    cfg: &NeuronConfig,
    freeze: &mut FreezeMode,
    label: &str,
) -> Result<Var> {
    run(tape, x, cfg, Kind::Binary, freeze, label)
}

/// Tape-free NI-LIF forward returning normalised spikes.
pub fn nilif_forward(u_seq: &Tensor, cfg: &NeuronConfig) -> Result<Tensor> {
    let d = u_seq.dims5()?;
    if !u_seq.is_finite() {
        return Err(Error::Numeric { layer: "nilif".into() });
    }
    Tensor::from_vec5(d, simulate(u_seq.data(), d.t, Kind::Multi, cfg, None, false).out)
}

/// Tape-free binary LIF forward returning `{0, 1}` spikes.
pub fn binary_lif_forward(u_seq: &Tensor, cfg: &NeuronConfig) -> Result<Tensor> {
    let d = u_seq.dims5()?;
    if !u_seq.is_finite() {
        return Err(Error::Numeric { layer: "binary_lif".into() });
    }
    Tensor::from_vec5(d, simulate(u_seq.data(), d.t, Kind::Binary, cfg, None, false).out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(values: &[f32]) -> Tensor {
        Tensor::from_vec(vec![values.len(), 1, 1, 1, 1], values.to_vec()).unwrap()
    }

    fn cfg(gamma: f32, v_th: f32, d: u32) -> NeuronConfig {
        NeuronConfig {
            gamma,
            v_th,
            d_levels: d,
            surrogate_alpha: 4.0,
        }
    }

    #[test]
    fn zero_drive_stays_silent() {
        let out = nilif_forward(&Tensor::zeros(&[4, 2, 3, 2, 2]), &NeuronConfig::default()).unwrap();
        assert!(out.data().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn hand_trace_single_level() {
        // μ = 0.6, 0.9, 1.05 -> fires on the third step only
        let out = nilif_forward(&seq(&[0.6, 0.6, 0.6]), &cfg(0.5, 1.0, 1)).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn quantiser_levels() {
        let c = cfg(1.0, 1.0, 4);
        let q = |v: f32| nilif_forward(&seq(&[v]), &c).unwrap().data()[0];
        assert_eq!(q(2.3), 0.5);
        assert_eq!(q(-0.4), 0.0);
        assert_eq!(q(7.0), 1.0);
    }

    #[test]
    fn binary_hand_trace() {
        let out = binary_lif_forward(&seq(&[1.2, 0.1, 0.1]), &cfg(0.5, 1.0, 4)).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn binary_fires_every_step_above_threshold() {
        for &gamma in &[0.1, 0.5, 1.0] {
            let out = binary_lif_forward(&seq(&[1.0, 3.0, 1.5, 1.0, 2.0]), &cfg(gamma, 1.0, 4)).unwrap();
            assert!(out.data().iter().all(|&s| s == 1.0));
        }
    }

    #[test]
    fn surrogate_values() {
        assert!((surrogate_grad(0.0, 4.0) - 1.0).abs() < 1e-7);
        assert!(surrogate_grad(1e4, 4.0).abs() < 1e-12);
        assert!(surrogate_grad(-1e4, 4.0).abs() < 1e-12);
        for &x in &[0.1f32, 0.7, 2.5] {
            assert!((surrogate_grad(x, 3.0) - surrogate_grad(-x, 3.0)).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_input_names_layer() {
        let mut tape = Tape::new();
        let x = tape.constant(seq(&[0.0, f32::NAN]));
        let err = nilif(&mut tape, x, &NeuronConfig::default(), &mut FreezeMode::Off, "enc1.sn2").unwrap_err();
        assert!(err.to_string().contains("enc1.sn2"));
    }

    #[test]
    fn config_validation() {
        assert!(NeuronConfig::default().validate().is_ok());
        assert!(cfg(0.0, 1.0, 4).validate().is_err());
        assert!(cfg(1.5, 1.0, 4).validate().is_err());
        assert!(cfg(0.5, 0.0, 4).validate().is_err());
        assert!(cfg(0.5, 1.0, 0).validate().is_err());
    }

    #[test]
    fn replay_reproduces_recorded_spikes() {
        let u = Tensor::from_vec(vec![3, 1, 1, 2, 2], (0..12).map(|i| (i as f32 * 0.77).sin() * 2.0).collect()).unwrap();
        let c = NeuronConfig::default();
        for kind in [Kind::Multi, Kind::Binary] {
            let mut tape = Tape::new();
            let x = tape.constant(u.clone());
            let mut freeze = FreezeMode::Record(vec![]);
            let a = run(&mut tape, x, &c, kind, &mut freeze, "n").unwrap();
            let mut replay = FreezeMode::replay(freeze.into_residuals());
            let b = run(&mut tape, x, &c, kind, &mut replay, "n").unwrap();
            assert!(tape.value(a).max_abs_diff(tape.value(b)) < 1e-6);
        }
    }
}
