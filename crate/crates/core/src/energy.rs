//! Operation-count energy proxy.
//!
//! A convolution producing an `H_out × W_out` map with `C_in → C_out`
//! channels and a `k × k` kernel performs `H_out·W_out·C_in·C_out·k²`
//! multiply-accumulates per step. Dense layers are billed at
//! [`E_MAC_PJ`] per operation; spike-driven layers only accumulate when a
//! spike arrives and are billed at `(T·D)·fr` times that count at
//! [`E_AC_PJ`], where `fr` is the measured fraction of nonzero inputs.
//!
//! Only convolutions are counted. Normalisation, pooling, elementwise
//! arithmetic and attention gates are excluded.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autograd::ParamStore;
use crate::error::{Error, Result};
use crate::layers::{ConvRecord, Probe};
use crate::network::Uiesnn;
use crate::tensor::Tensor;

pub const E_MAC_PJ: f64 = 4.9;
pub const E_AC_PJ: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    SpikeDriven,
    Dense,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::SpikeDriven => "spike",
            LayerKind::Dense => "dense",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "spike" => Some(LayerKind::SpikeDriven),
            "dense" => Some(LayerKind::Dense),
            _ => None,
        }
    }
}

/// Geometry of one convolution layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub h_out: usize,
    pub w_out: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
}

impl LayerSpec {
    /// Square-output convenience constructor.
    pub fn square(name: &str, kind: LayerKind, o: usize, c_in: usize, c_out: usize, k: usize) -> Self {
        Self {
            name: name.to_string(),
            kind,
            h_out: o,
            w_out: o,
            c_in,
            c_out,
            k,
        }
    }

    /// Multiply-accumulates per image per step.
    pub fn ops(&self) -> f64 {
        (self.h_out * self.w_out) as f64 * self.c_in as f64 * self.c_out as f64 * (self.k * self.k) as f64
    }

    fn validate(&self) -> Result<()> {
        if [self.h_out, self.w_out, self.c_in, self.c_out, self.k].contains(&0) {
            return Err(Error::param(format!("layer `{}` has a zero dimension", self.name)));
        }
        Ok(())
    }
}

/// Energy of one layer in picojoules.
pub fn layer_energy(spec: &LayerSpec, fr: f64, timesteps: usize, d_levels: usize) -> Result<f64> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&fr) {
        return Err(Error::param(format!("firing rate {fr} outside [0, 1]")));
    }
    Ok(match spec.kind {
        LayerKind::Dense => spec.ops() * E_MAC_PJ,
        LayerKind::SpikeDriven => (timesteps * d_levels) as f64 * fr * spec.ops() * E_AC_PJ,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerEnergy {
    pub spec: LayerSpec,
    pub fr: f64,
    pub energy_pj: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    pub layers: Vec<LayerEnergy>,
    pub timesteps: usize,
    pub d_levels: usize,
    pub e_mac: f64,
    pub e_ac: f64,
}

pub const CSV_HEADER: &str = "name,kind,O,c_in,c_out,k,fr,energy_pJ";

impl EnergyLedger {
    pub fn new(timesteps: usize, d_levels: usize) -> Self {
        Self {
            layers: Vec::new(),
            timesteps,
            d_levels,
            e_mac: E_MAC_PJ,
            e_ac: E_AC_PJ,
        }
    }

    pub fn push(&mut self, spec: LayerSpec, fr: f64) -> Result<()> {
        let energy_pj = layer_energy(&spec, fr, self.timesteps, self.d_levels)?;
        self.layers.push(LayerEnergy { spec, fr, energy_pj });
        Ok(())
    }

    /// Builds a ledger from the convolutions seen by an instrumented forward.
    pub fn from_records(records: &[ConvRecord], timesteps: usize, d_levels: usize) -> Result<Self> {
        let mut ledger = Self::new(timesteps, d_levels);
        for r in records {
            let spec = LayerSpec {
                name: r.name.clone(),
                kind: r.kind,
                h_out: r.h_out,
                w_out: r.w_out,
                c_in: r.c_in,
                c_out: r.c_out,
                k: r.k,
            };
            ledger.push(spec, r.input_rate)?;
        }
        Ok(ledger)
    }

    /// Same layers and firing rates re-billed at another `T × D`.
    pub fn rebill(&self, timesteps: usize, d_levels: usize) -> Result<Self> {
        let mut out = Self::new(timesteps, d_levels);
        for l in &self.layers {
            out.push(l.spec.clone(), l.fr)?;
        }
        Ok(out)
    }

    pub fn total_pj(&self) -> f64 {
        self.layers.iter().fold(0.0, |acc, l| acc + l.energy_pj)
    }

    pub fn total_mj(&self) -> f64 {
        self.total_pj() * 1e-9
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for l in &self.layers {
            let p = &l.spec;
            writeln!(
                s,
                "{},{},{}x{},{},{},{},{},{}",
                p.name,
                p.kind.as_str(),
                p.h_out,
                p.w_out,
                p.c_in,
                p.c_out,
                p.k,
                l.fr,
                l.energy_pj
            )
            .unwrap();
        }
        s
    }

    pub fn from_csv(text: &str, timesteps: usize, d_levels: usize) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::format(0, "missing energy CSV header"));
        }
        let mut ledger = Self::new(timesteps, d_levels);
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::format(0, format!("energy CSV row {}: {what}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad("expected 8 fields"));
            }
            let (h, w) = f[2].split_once('x').ok_or_else(|| bad("O must be HxW"))?;
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad integer"));
            let spec = LayerSpec {
                name: f[0].to_string(),
                kind: LayerKind::parse(f[1]).ok_or_else(|| bad("unknown kind"))?,
                h_out: num(h)?,
                w_out: num(w)?,
                c_in: num(f[3])?,
                c_out: num(f[4])?,
                k: num(f[5])?,
            };
            let fr: f64 = f[6].parse().map_err(|_| bad("bad firing rate"))?;
            let stored: f64 = f[7].parse().map_err(|_| bad("bad energy"))?;
            ledger.push(spec, fr)?;
            if ledger.layers.last().unwrap().energy_pj != stored {
                return Err(bad("energy does not match geometry and firing rate"));
            }
        }
        Ok(ledger)
    }

    /// Human-readable table sorted by energy, descending.
    pub fn report(&self) -> String {
        let mut rows: Vec<&LayerEnergy> = self.layers.iter().collect();
        rows.sort_by(|a, b| b.energy_pj.total_cmp(&a.energy_pj));
        let mut s = String::new();
        writeln!(
            s,
            "{:<36} {:>5} {:>9} {:>5} {:>5} {:>2} {:>7} {:>14}",
            "layer", "kind", "O", "c_in", "c_out", "k", "fr", "energy (pJ)"
        )
        .unwrap();
        for l in rows {
            let p = &l.spec;
            writeln!(
                s,
                "{:<36} {:>5} {:>9} {:>5} {:>5} {:>2} {:>7.4} {:>14.1}",
                p.name,
                p.kind.as_str(),
                format!("{}x{}", p.h_out, p.w_out),
                p.c_in,
                p.c_out,
                p.k,
                l.fr,
                l.energy_pj
            )
            .unwrap();
        }
        writeln!(
            s,
            "total: {:.6} mJ (T×D = {}×{}, E_MAC = {} pJ, E_AC = {} pJ)",
            self.total_mj(),
            self.timesteps,
            self.d_levels,
            self.e_mac,
            self.e_ac
        )
        .unwrap();
        s.push_str("convolutions only; normalisation, pooling, elementwise ops and attention gates are not billed\n");
        s
    }
}

/// Runs one eval-mode forward and returns every convolution with the
/// nonzero fraction of its input, averaged over timesteps and batch.
pub fn measure_firing_rates(model: &Uiesnn, params: &mut ParamStore, images: &Tensor) -> Result<Vec<ConvRecord>> {
    let (_, probe) = model.forward_probed(params, images, Probe::new())?;
    Ok(probe.convs)
}

/// Measures firing rates on `images` and bills them at the model's `T × D`.
pub fn profile(model: &Uiesnn, params: &mut ParamStore, images: &Tensor) -> Result<EnergyLedger> {
    let records = measure_firing_rates(model, params, images)?;
    let cfg = model.config();
    EnergyLedger::from_records(&records, cfg.timesteps, cfg.neuron.d_levels as usize)
}

/// The `T × D` grid `{1×1, 1×4, 4×1, 4×4}` billed with frozen firing rates.
pub const TD_GRID: [(usize, usize); 4] = [(1, 1), (1, 4), (4, 1), (4, 4)];

pub fn td_sweep(ledger: &EnergyLedger) -> Result<Vec<((usize, usize), f64)>> {
    TD_GRID
        .iter()
        .map(|&(t, d)| Ok(((t, d), ledger.rebill(t, d)?.total_pj())))
        .collect()
}
