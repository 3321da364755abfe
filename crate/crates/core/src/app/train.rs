//! Training loop, run manifest and replay.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, holdout_set, training_set, STREAM_CROPS, STREAM_INIT};
use crate::autograd::ParamStore;
use crate::config::TrainConfig;
use crate::data::sample_patches;
use crate::error::{Error, Result};
use crate::layers::Ctx;
use crate::loss::{objective, psnr, target_pyramid};
use crate::network::{save_checkpoint, Uiesnn};
use crate::optim::Adam;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_FILE: &str = "train_log.csv";
pub const EVAL_LOG_FILE: &str = "eval_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.uies";
pub const LOG_HEADER: &str = "iter,l_pix,l_ssim,l_fft,total,psnr_sample";

/// Everything needed to rerun a training job bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub started_unix: u64,
    pub seed: u64,
    /// Fully resolved configuration in the config file format.
    pub config: String,
    pub log: String,
    pub checkpoint: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub l_pix: f64,
    pub l_ssim: f64,
    pub l_fft: f64,
    pub total: f64,
    pub psnr_sample: f64,
}

impl LogRow {
    fn to_csv(self) -> String {
        format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.6}",
            self.iter, self.l_pix, self.l_ssim, self.l_fft, self.total, self.psnr_sample
        )
    }
}

pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub rows: Vec<LogRow>,
    pub model: Uiesnn,
    pub store: ParamStore,
}

/// Parses a training log written by [`train`].
pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(Error::Data(format!("{} is not a training log", path.display())));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Data(format!("bad log row `{l}`")))
            };
            Ok(LogRow {
                iter: num(0)? as usize,
                l_pix: num(1)?,
                l_ssim: num(2)?,
                l_fft: num(3)?,
                total: num(4)?,
                psnr_sample: num(5)?,
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_line(w: &mut BufWriter<File>, path: &Path, line: &str) -> Result<()> {
    writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn first_non_finite(store: &ParamStore, grads: bool) -> Option<String> {
    store
        .iter()
        .find(|p| !(if grads { &p.grad } else { &p.value }).is_finite())
        .map(|p| p.name.clone())
}

/// Trains per `cfg`, writing the manifest, CSV log and checkpoints under
/// `cfg.run.out_dir`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_, _| {})
}

/// [`train`] with a hook called on the parameters before every iteration.
pub fn train_with(cfg: &TrainConfig, mut hook: impl FnMut(usize, &mut ParamStore)) -> Result<TrainOutcome> {
    let out = cfg.run.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        seed: cfg.seed,
        config: cfg.to_toml(),
        log: LOG_FILE.into(),
        checkpoint: CHECKPOINT_FILE.into(),
    };
    let manifest_path = out.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    let set = training_set(cfg)?;
    let holdout = if cfg.run.eval_every > 0 { Some(holdout_set(cfg)) } else { None };
    let mut store = ParamStore::new();
    let model = Uiesnn::new(cfg.net.clone(), &mut store, derive_seed(cfg.seed, STREAM_INIT))?;
    let mut opt = Adam::new(cfg.optim, &store);
    let mut crops = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_CROPS));

    let ckpt = out.join(CHECKPOINT_FILE);
    save_checkpoint(&ckpt, &model, &store, 0)?;
    let log_path = out.join(LOG_FILE);
    let mut log = create(&log_path)?;
    write_line(&mut log, &log_path, LOG_HEADER)?;
    let mut eval_log = match holdout {
        Some(_) => {
            let p = out.join(EVAL_LOG_FILE);
            let mut w = create(&p)?;
            write_line(&mut w, &p, "iter,mean_psnr_input,mean_psnr,mean_ssim")?;
            Some((p, w))
        }
        None => None,
    };

    log::info!("training {} parameters for {} iterations", store.num_trainable(), cfg.iterations);
    let mut rows = Vec::with_capacity(cfg.iterations);
    for iter in 0..cfg.iterations {
        hook(iter, &mut store);
        let batch = sample_patches(&set, cfg.data.patch, cfg.data.batch, cfg.data.flip, &mut crops)?;
        let targets = target_pyramid(&batch.clean)?;
        store.zero_grads();
        let mut ctx = Ctx::new(&mut store, true);
        let img = ctx.tape.constant(batch.degraded);
        let preds = model.forward_ctx(&mut ctx, img)?;
        let (loss, br) = objective(&mut ctx.tape, &preds, &targets, &cfg.loss)?;
        if !br.total.is_finite() {
            return Err(Error::Numeric { layer: "loss".into() });
        }
        let sample = ctx.value(preds.full).map(|v| v.clamp(0.0, 1.0));
        let psnr_sample = psnr(&sample, &batch.clean, 1.0)?;
        let mut tape = std::mem::take(&mut ctx.tape);
        drop(ctx);
        tape.backward(loss, &mut store)?;
        drop(tape);
        if let Some(name) = first_non_finite(&store, true) {
            return Err(Error::Numeric { layer: format!("gradient of {name}") });
        }
        opt.step(&mut store, cfg.lr_decay.lr_at(cfg.optim.lr, iter, cfg.iterations));
        if let Some(name) = first_non_finite(&store, false) {
            return Err(Error::Numeric { layer: name });
        }
        let row = LogRow {
            iter: iter + 1,
            l_pix: br.l_pix,
            l_ssim: br.l_ssim,
            l_fft: br.l_fft,
            total: br.total,
            psnr_sample,
        };
        write_line(&mut log, &log_path, &row.to_csv())?;
        if (iter + 1) % 50 == 0 || iter == 0 {
            log::info!("iter {} total {:.5} psnr {:.2}", row.iter, row.total, row.psnr_sample);
        }
        rows.push(row);
        let step = iter + 1;
        if step % cfg.run.checkpoint_every.max(1) == 0 || step == cfg.iterations {
            save_checkpoint(&ckpt, &model, &store, step as u64)?;
        }
        if let (Some(h), Some((p, w))) = (&holdout, &mut eval_log) {
            if step % cfg.run.eval_every == 0 || step == cfg.iterations {
                let r = super::evaluate_pairs(&model, &mut store, h, None)?;
                write_line(w, p, &format!("{step},{:.6},{:.6},{:.6}", r.mean_psnr_input, r.mean_psnr, r.mean_ssim))?;
            }
        }
    }
    Ok(TrainOutcome {
        out_dir: out,
        checkpoint: ckpt,
        log: log_path,
        rows,
        model,
        store,
    })
}

/// Reruns the job recorded in a manifest, writing into `out_dir`.
pub fn replay(manifest: &Path, out_dir: &Path) -> Result<TrainOutcome> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", manifest.display())))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut cfg = TrainConfig::parse_str(&m.config, &manifest.display().to_string(), base)?;
    cfg.run.out_dir = out_dir.to_path_buf();
    train(&cfg)
}
