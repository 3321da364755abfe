//! Run configuration: a flat-key TOML file with typed values and `include`.
//!
//! ```toml
//! include = ["base.toml"]
//! net.timesteps = 4
//! net.stage_layout = [2, 2, 4, 1, 1, 1]
//! data.patch = 64
//! ```
//!
//! Included files are applied first, in order, relative to the including
//! file; keys in the including file then override them. Keys may also be
//! written inside `[section]` tables. Unknown keys and badly typed values are
//! errors that name the key, file and line.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::network::NetConfig;
use crate::optim::{AdamConfig, LrDecay};

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    /// Paired directory (`input/`, `gt/`); `None` trains on synthetic pairs.
    pub root: Option<PathBuf>,
    pub synthetic_count: usize,
    pub synthetic_size: usize,
    /// Synthetic pairs held out for evaluation, drawn from a separate seed.
    pub holdout_count: usize,
    pub patch: usize,
    pub batch: usize,
    pub flip: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: None,
            synthetic_count: 256,
            synthetic_size: 96,
            holdout_count: 32,
            patch: 64,
            batch: 12,
            flip: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Iterations between checkpoints; the final step always checkpoints.
    pub checkpoint_every: usize,
    /// Iterations between held-out evaluations; 0 disables them.
    pub eval_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs/default"),
            checkpoint_every: 500,
            eval_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub net: NetConfig,
    pub loss: LossWeights,
    pub optim: AdamConfig,
    pub iterations: usize,
    pub lr_decay: LrDecay,
    pub data: DataConfig,
    pub run: RunConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            loss: LossWeights::default(),
            optim: AdamConfig::default(),
            iterations: 10_000,
            lr_decay: LrDecay::Constant,
            data: DataConfig::default(),
            run: RunConfig::default(),
            seed: 0,
        }
    }
}

/// Every recognised key, in serialisation order.
pub const KEYS: &[&str] = &[
    "seed",
    "net.timesteps",
    "net.base_channels",
    "net.stage_layout",
    "net.alpha_bn",
    "neuron.gamma",
    "neuron.v_th",
    "neuron.d_levels",
    "neuron.surrogate_alpha",
    "toggles.fdm",
    "toggles.mda",
    "toggles.mplb",
    "loss.lambda_pix",
    "loss.lambda_ssim",
    "loss.lambda_fft",
    "optim.kind",
    "optim.lr",
    "optim.beta1",
    "optim.beta2",
    "optim.eps",
    "optim.weight_decay",
    "schedule.iterations",
    "schedule.lr_decay",
    "data.root",
    "data.synthetic_count",
    "data.synthetic_size",
    "data.holdout_count",
    "data.patch",
    "data.batch",
    "data.flip",
    "run.out_dir",
    "run.checkpoint_every",
    "run.eval_every",
];

#[derive(Clone, Debug)]
enum Value {
    Int(u64),
    Float(f32),
    Bool(bool),
    Str(String),
    List(Vec<usize>),
}

fn fmt_f32(x: f32) -> String {
    let short = format!("{x:?}");
    if short.parse::<f64>().map(|d| d as f32) == Ok(x) {
        short
    } else {
        format!("{:?}", x as f64)
    }
}

impl Value {
    fn to_toml(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => fmt_f32(*v),
            Value::Bool(v) => v.to_string(),
            Value::Str(s) => toml::Value::String(s.clone()).to_string(),
            Value::List(v) => format!("[{}]", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")),
        }
    }
}

fn expect_uint(v: &toml::Value) -> std::result::Result<u64, String> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => Err(format!("expected a non-negative integer, found {other}")),
    }
}

fn expect_usize(v: &toml::Value) -> std::result::Result<usize, String> {
    expect_uint(v).and_then(|x| usize::try_from(x).map_err(|_| format!("{x} is too large")))
}

fn expect_u32(v: &toml::Value) -> std::result::Result<u32, String> {
    expect_uint(v).and_then(|x| u32::try_from(x).map_err(|_| format!("{x} is too large")))
}

fn expect_f32(v: &toml::Value) -> std::result::Result<f32, String> {
    match v {
        toml::Value::Float(f) => Ok(*f as f32),
        toml::Value::Integer(i) => Ok(*i as f32),
        other => Err(format!("expected a number, found {other}")),
    }
}

fn expect_bool(v: &toml::Value) -> std::result::Result<bool, String> {
    v.as_bool().ok_or_else(|| format!("expected true or false, found {v}"))
}

fn expect_str(v: &toml::Value) -> std::result::Result<&str, String> {
    v.as_str().ok_or_else(|| format!("expected a string, found {v}"))
}

fn expect_list(v: &toml::Value) -> std::result::Result<Vec<usize>, String> {
    let arr = v.as_array().ok_or_else(|| format!("expected an integer array, found {v}"))?;
    arr.iter().map(expect_usize).collect()
}

impl TrainConfig {
    fn get(&self, key: &str) -> Option<Value> {
        let n = &self.net;
        Some(match key {
            "seed" => Value::Int(self.seed),
            "net.timesteps" => Value::Int(n.timesteps as u64),
            "net.base_channels" => Value::Int(n.base_channels as u64),
            "net.stage_layout" => Value::List(n.stage_layout.clone()),
            "net.alpha_bn" => Value::Float(n.alpha_bn),
            "neuron.gamma" => Value::Float(n.neuron.gamma),
            "neuron.v_th" => Value::Float(n.neuron.v_th),
            "neuron.d_levels" => Value::Int(n.neuron.d_levels as u64),
            "neuron.surrogate_alpha" => Value::Float(n.neuron.surrogate_alpha),
            "toggles.fdm" => Value::Bool(n.toggles.fdm),
            "toggles.mda" => Value::Bool(n.toggles.mda),
            "toggles.mplb" => Value::Bool(n.toggles.mplb),
            "loss.lambda_pix" => Value::Float(self.loss.lambda_pix),
            "loss.lambda_ssim" => Value::Float(self.loss.lambda_ssim),
            "loss.lambda_fft" => Value::Float(self.loss.lambda_fft),
            "optim.kind" => Value::Str("adam".into()),
            "optim.lr" => Value::Float(self.optim.lr),
            "optim.beta1" => Value::Float(self.optim.beta1),
            "optim.beta2" => Value::Float(self.optim.beta2),
            "optim.eps" => Value::Float(self.optim.eps),
            "optim.weight_decay" => Value::Float(self.optim.weight_decay),
            "schedule.iterations" => Value::Int(self.iterations as u64),
            "schedule.lr_decay" => Value::Str(self.lr_decay.as_str().into()),
            "data.root" => Value::Str(self.data.root.as_ref()?.to_string_lossy().into_owned()),
            "data.synthetic_count" => Value::Int(self.data.synthetic_count as u64),
            "data.synthetic_size" => Value::Int(self.data.synthetic_size as u64),
            "data.holdout_count" => Value::Int(self.data.holdout_count as u64),
            "data.patch" => Value::Int(self.data.patch as u64),
            "data.batch" => Value::Int(self.data.batch as u64),
            "data.flip" => Value::Bool(self.data.flip),
            "run.out_dir" => Value::Str(self.run.out_dir.to_string_lossy().into_owned()),
            "run.checkpoint_every" => Value::Int(self.run.checkpoint_every as u64),
            "run.eval_every" => Value::Int(self.run.eval_every as u64),
            _ => return None,
        })
    }

    fn set(&mut self, key: &str, v: &toml::Value) -> std::result::Result<(), String> {
        let n = &mut self.net;
        match key {
            "seed" => self.seed = expect_uint(v)?,
            "net.timesteps" => n.timesteps = expect_usize(v)?,
            "net.base_channels" => n.base_channels = expect_usize(v)?,
            "net.stage_layout" => n.stage_layout = expect_list(v)?,
            "net.alpha_bn" => n.alpha_bn = expect_f32(v)?,
            "neuron.gamma" => n.neuron.gamma = expect_f32(v)?,
            "neuron.v_th" => n.neuron.v_th = expect_f32(v)?,
            "neuron.d_levels" => n.neuron.d_levels = expect_u32(v)?,
            "neuron.surrogate_alpha" => n.neuron.surrogate_alpha = expect_f32(v)?,
            "toggles.fdm" => n.toggles.fdm = expect_bool(v)?,
            "toggles.mda" => n.toggles.mda = expect_bool(v)?,
            "toggles.mplb" => n.toggles.mplb = expect_bool(v)?,
            "loss.lambda_pix" => self.loss.lambda_pix = expect_f32(v)?,
            "loss.lambda_ssim" => self.loss.lambda_ssim = expect_f32(v)?,
            "loss.lambda_fft" => self.loss.lambda_fft = expect_f32(v)?,
            "optim.kind" => {
                let s = expect_str(v)?;
                if s != "adam" {
                    return Err(format!("unsupported optimizer `{s}`, only `adam` is available"));
                }
            }
            "optim.lr" => self.optim.lr = expect_f32(v)?,
            "optim.beta1" => self.optim.beta1 = expect_f32(v)?,
            "optim.beta2" => self.optim.beta2 = expect_f32(v)?,
            "optim.eps" => self.optim.eps = expect_f32(v)?,
            "optim.weight_decay" => self.optim.weight_decay = expect_f32(v)?,
            "schedule.iterations" => self.iterations = expect_usize(v)?,
            "schedule.lr_decay" => {
                let s = expect_str(v)?;
                self.lr_decay = LrDecay::parse(s).ok_or_else(|| format!("unknown decay `{s}`, expected constant or cosine"))?;
            }
            "data.root" => self.data.root = Some(PathBuf::from(expect_str(v)?)),
            "data.synthetic_count" => self.data.synthetic_count = expect_usize(v)?,
            "data.synthetic_size" => self.data.synthetic_size = expect_usize(v)?,
            "data.holdout_count" => self.data.holdout_count = expect_usize(v)?,
            "data.patch" => self.data.patch = expect_usize(v)?,
            "data.batch" => self.data.batch = expect_usize(v)?,
            "data.flip" => self.data.flip = expect_bool(v)?,
            "run.out_dir" => self.run.out_dir = PathBuf::from(expect_str(v)?),
            "run.checkpoint_every" => self.run.checkpoint_every = expect_usize(v)?,
            "run.eval_every" => self.run.eval_every = expect_usize(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Flat-key TOML accepted by [`TrainConfig::parse_str`].
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = self.get(key) {
                let _ = writeln!(out, "{key} = {}", v.to_toml());
            }
        }
        out
    }

    /// Reads a configuration file on top of the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut origins = HashMap::new();
        cfg.apply_file(path, &mut Vec::new(), &mut origins)?;
        cfg.check(&origins)?;
        Ok(cfg)
    }

    /// Parses configuration text on top of the defaults. `file` labels
    /// errors; includes resolve against `base_dir`.
    pub fn parse_str(text: &str, file: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut origins = HashMap::new();
        cfg.apply_text(text, file, base_dir, &mut Vec::new(), &mut origins)?;
        cfg.check(&origins)?;
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path, stack: &mut Vec<PathBuf>, origins: &mut Origins) -> Result<()> {
        let canon = path.canonicalize().map_err(|e| Error::io(path, e))?;
        if stack.contains(&canon) {
            return Err(Error::Config {
                key: "include".into(),
                file: path.display().to_string(),
                line: 0,
                msg: "include cycle".into(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        stack.push(canon);
        let base = path.parent().unwrap_or(Path::new("."));
        let r = self.apply_text(&text, &path.display().to_string(), base, stack, origins);
        stack.pop();
        r
    }

    fn apply_text(&mut self, text: &str, file: &str, base_dir: &Path, stack: &mut Vec<PathBuf>, origins: &mut Origins) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            key: "(syntax)".into(),
            file: file.into(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        let lines = key_lines(text);
        let err = |key: &str, msg: String| Error::Config {
            key: key.into(),
            file: file.into(),
            line: lines.get(key).copied().unwrap_or(0),
            msg,
        };
        if let Some(inc) = table.get("include") {
            let list = inc.as_array().ok_or_else(|| err("include", "expected an array of paths".into()))?;
            for item in list {
                let rel = item.as_str().ok_or_else(|| err("include", format!("expected a path string, found {item}")))?;
                self.apply_file(&base_dir.join(rel), stack, origins)?;
            }
        }
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        for (key, value) in flat {
            if key == "include" {
                continue;
            }
            self.set(&key, value).map_err(|m| err(&key, m))?;
            origins.insert(key.clone(), (file.to_string(), lines.get(&key).copied().unwrap_or(0)));
        }
        Ok(())
    }

    fn check(&self, origins: &Origins) -> Result<()> {
        let fail = |key: &str, msg: String| {
            let (file, line) = origins
                .iter()
                .filter(|(k, _)| k.as_str() == key || k.starts_with(&format!("{key}.")))
                .map(|(_, o)| o.clone())
                .next()
                .unwrap_or_else(|| ("<defaults>".into(), 0));
            Err(Error::Config { key: key.into(), file, line, msg })
        };
        if self.seed > i64::MAX as u64 {
            return fail("seed", "seed must fit in a signed 64-bit integer".into());
        }
        if self.data.patch == 0 || !self.data.patch.is_multiple_of(4) {
            return fail("data.patch", format!("patch must be a positive multiple of 4, got {}", self.data.patch));
        }
        if self.data.batch == 0 {
            return fail("data.batch", "batch must be at least 1".into());
        }
        if self.iterations == 0 {
            return fail("schedule.iterations", "iterations must be at least 1".into());
        }
        if self.data.root.is_none() && self.data.synthetic_size < self.data.patch {
            return fail("data.synthetic_size", "synthetic images must be at least one patch wide".into());
        }
        if self.data.root.is_none() && self.data.synthetic_count == 0 {
            return fail("data.synthetic_count", "at least one synthetic pair is required".into());
        }
        if let Err(e) = self.net.neuron.validate() {
            return fail("neuron", e.to_string());
        }
        if let Err(e) = self.net.validate() {
            return fail("net", e.to_string());
        }
        if let Err(e) = self.loss.validate() {
            return fail("loss", e.to_string());
        }
        if let Err(e) = self.optim.validate() {
            return fail("optim", e.to_string());
        }
        Ok(())
    }
}

type Origins = HashMap<String, (String, usize)>;

fn flatten<'a>(prefix: &str, table: &'a toml::Table, out: &mut Vec<(String, &'a toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v)),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line on which each dotted key is assigned, honouring `[section]`.
fn key_lines(text: &str) -> HashMap<String, usize> {
    let mut out = HashMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') && !line.starts_with("[[") {
            section = line.trim_matches(|c| c == '[' || c == ']').replace(' ', "");
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        if lhs.starts_with('#') {
            continue;
        }
        let key: String = lhs.split('.').map(|s| s.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
        let full = if section.is_empty() { key } else { format!("{section}.{key}") };
        out.entry(full).or_insert(i + 1);
    }
    out
}
