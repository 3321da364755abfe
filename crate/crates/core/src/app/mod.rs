//! Command implementations behind the `uiesnn` binary.

mod ablate;
mod eval;
mod profile;
mod spikemap;
mod train;

pub use ablate::{ablation_table, run_ablation, AblationRow, ABLATION_ROWS};
pub use eval::{evaluate_pairs, EvalReport, ImageScore};
pub use profile::{energy_report, profile_images, EnergyOutput};
pub use spikemap::{dump_spikemaps, mplb_instances};
pub use train::{
    read_log, replay, train, train_with, LogRow, RunManifest, TrainOutcome, CHECKPOINT_FILE, EVAL_LOG_FILE, LOG_FILE, LOG_HEADER,
    MANIFEST_FILE,
};

use std::path::Path;

use crate::config::TrainConfig;
use crate::data::{load_image, ImageRGB, PairSet};
use crate::error::{Error, Result};

/// Process exit status for an error: 2 config, 3 data, 4 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Usage(_) | Error::Param(_) => 2,
        Error::Numeric { .. } => 4,
        Error::Shape(_) | Error::Format { .. } | Error::IncompatibleCheckpoint { .. } | Error::Data(_) | Error::Io { .. } => 3,
    }
}

/// Independent stream `k` of a root seed (splitmix64 finaliser).
pub fn derive_seed(root: u64, k: u64) -> u64 {
    let mut z = root.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_DATA: u64 = 2;
pub(crate) const STREAM_CROPS: u64 = 3;
pub(crate) const STREAM_HOLDOUT: u64 = 4;

/// Training pairs: the paired directory when configured, else synthetic.
pub fn training_set(cfg: &TrainConfig) -> Result<PairSet> {
    match &cfg.data.root {
        Some(root) => {
            let (set, _) = PairSet::load_dir(root)?;
            if set.is_empty() {
                return Err(Error::Data(format!("no image pairs under {}", root.display())));
            }
            Ok(set)
        }
        None => Ok(PairSet::synthetic(
            cfg.data.synthetic_count,
            cfg.data.synthetic_size,
            cfg.data.synthetic_size,
            derive_seed(cfg.seed, STREAM_DATA),
        )),
    }
}

/// Synthetic evaluation pairs disjoint in seed from the training pairs.
pub fn holdout_set(cfg: &TrainConfig) -> PairSet {
    PairSet::synthetic(
        cfg.data.holdout_count,
        cfg.data.synthetic_size,
        cfg.data.synthetic_size,
        derive_seed(cfg.seed, STREAM_HOLDOUT),
    )
}

/// Pairs from a paired directory, or a lone image / flat directory of images
/// treated as their own references.
pub fn load_inputs(path: &Path) -> Result<Vec<ImageRGB>> {
    if path.is_file() {
        return Ok(vec![load_image(path)?]);
    }
    if path.join("input").is_dir() {
        return Ok(PairSet::load_dir(path)?.0.pairs.into_iter().map(|p| p.degraded).collect());
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("ppm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("no images found under {}", path.display())));
    }
    files.iter().map(|p| load_image(p)).collect()
}

/// Writes `n` synthetic pairs as `{root}/input/*.png` and `{root}/gt/*.png`.
pub fn write_synthetic(root: &Path, n: usize, size: usize, seed: u64) -> Result<usize> {
    let set = PairSet::synthetic(n, size, size, seed);
    for sub in ["input", "gt"] {
        let d = root.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for p in &set.pairs {
        crate::data::save_image(&p.degraded, &root.join("input").join(format!("{}.png", p.id)))?;
        crate::data::save_image(&p.clean, &root.join("gt").join(format!("{}.png", p.id)))?;
    }
    Ok(set.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_streams_differ() {
        let s: Vec<u64> = (0..5).map(|k| derive_seed(7, k)).collect();
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Numeric { layer: "loss".into() }), 4);
        assert_eq!(exit_code(&Error::Data("x".into())), 3);
        assert_eq!(
            exit_code(&Error::Config {
                key: "k".into(),
                file: "f".into(),
                line: 1,
                msg: "m".into()
            }),
            2
        );
    }
}
