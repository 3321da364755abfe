//! Paired degraded/clean datasets and aligned patch sampling.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{degrade, load_image, synth_texture, DegradeParams, DegradeRanges, ImageRGB};
use crate::error::{Error, Result};
use crate::ops::reflect_index;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub id: String,
    pub degraded: ImageRGB,
    pub clean: ImageRGB,
}

impl Pair {
    pub fn new(id: impl Into<String>, degraded: ImageRGB, clean: ImageRGB) -> Result<Self> {
        let id = id.into();
        if (degraded.height, degraded.width) != (clean.height, clean.width) {
            return Err(Error::Data(format!(
                "pair {id}: input is {}×{} but ground truth is {}×{}",
                degraded.height, degraded.width, clean.height, clean.width
            )));
        }
        Ok(Self { id, degraded, clean })
    }

    fn size(&self) -> (usize, usize) {
        (self.clean.height, self.clean.width)
    }
}

#[derive(Clone, Debug, Default)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
}

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "ppm"];

fn image_stems(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `n` procedural textures degraded with parameters drawn from the default
    /// ranges. Pair `i` depends only on `(seed, i)`.
    pub fn synthetic(n: usize, height: usize, width: usize, seed: u64) -> Self {
        let ranges = DegradeRanges::default();
        let pairs = (0..n)
            .map(|i| {
                let s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
                let clean = synth_texture(height, width, &mut ChaCha8Rng::seed_from_u64(s));
                let p = DegradeParams::sample(&ranges, s ^ 0x5eed);
                Pair {
                    id: format!("synth{i:04}"),
                    degraded: degrade(&clean, &p),
                    clean,
                }
            })
            .collect();
        Self { pairs }
    }

    /// Loads `root/input/*` and `root/gt/*` matched by file stem. Files
    /// without a partner are skipped and reported in the returned list.
    pub fn load_dir(root: &Path) -> Result<(Self, Vec<String>)> {
        let inputs = image_stems(&root.join("input"))?;
        let gts = image_stems(&root.join("gt"))?;
        let mut warnings = Vec::new();
        let mut pairs = Vec::new();
        for (stem, path) in &inputs {
            match gts.get(stem) {
                Some(gt) => pairs.push(Pair::new(stem.clone(), load_image(path)?, load_image(gt)?)?),
                None => warnings.push(format!("unpaired input {}", path.display())),
            }
        }
        for (stem, path) in &gts {
            if !inputs.contains_key(stem) {
                warnings.push(format!("unpaired ground truth {}", path.display()));
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok((Self { pairs }, warnings))
    }
}

/// Aligned degraded/clean patches, each `1 × B × 3 × h × w`.
#[derive(Clone, Debug)]
pub struct PairBatch {
    pub degraded: Tensor,
    pub clean: Tensor,
    pub ids: Vec<String>,
}

fn reflect_to(img: &ImageRGB, h: usize, w: usize) -> ImageRGB {
    let mut data = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        for y in 0..h {
            let sy = reflect_index(y as isize, img.height);
            for x in 0..w {
                data.push(img.at(c, sy, reflect_index(x as isize, img.width)));
            }
        }
    }
    ImageRGB { height: h, width: w, data }
}

/// Draws `batch` pairs uniformly with replacement and crops the same random
/// `patch × patch` window (and optional mirror) from both sides.
///
/// Pairs smaller than the patch are skipped; if every pair is too small they
/// are reflect-padded up to the patch size instead.
pub fn sample_patches(set: &PairSet, patch: usize, batch: usize, flip: bool, rng: &mut impl Rng) -> Result<PairBatch> {
    if patch == 0 || batch == 0 {
        return Err(Error::param("patch and batch must be positive"));
    }
    if set.is_empty() {
        return Err(Error::Data("no image pairs to sample from".into()));
    }
    let fits: Vec<usize> = (0..set.len())
        .filter(|&i| {
            let (h, w) = set.pairs[i].size();
            h >= patch && w >= patch
        })
        .collect();
    let pad = fits.is_empty();
    if pad {
        log::warn!("every pair is smaller than {patch}×{patch}; reflect-padding");
    } else if fits.len() < set.len() {
        log::warn!("skipping {} pairs smaller than {patch}×{patch}", set.len() - fits.len());
    }
    let mut deg = Vec::with_capacity(batch);
    let mut cln = Vec::with_capacity(batch);
    let mut ids = Vec::with_capacity(batch);
    for _ in 0..batch {
        let idx = if pad { rng.gen_range(0..set.len()) } else { fits[rng.gen_range(0..fits.len())] };
        let pair = &set.pairs[idx];
        let (d, c) = if pad {
            let (h, w) = pair.size();
            let (h, w) = (h.max(patch), w.max(patch));
            (reflect_to(&pair.degraded, h, w), reflect_to(&pair.clean, h, w))
        } else {
            (pair.degraded.clone(), pair.clean.clone())
        };
        let y = rng.gen_range(0..=d.height - patch);
        let x = rng.gen_range(0..=d.width - patch);
        let mirror = flip && rng.gen_bool(0.5);
        deg.push(d.crop(y, x, patch, patch, mirror));
        cln.push(c.crop(y, x, patch, patch, mirror));
        ids.push(pair.id.clone());
    }
    Ok(PairBatch {
        degraded: ImageRGB::batch(&deg.iter().collect::<Vec<_>>())?,
        clean: ImageRGB::batch(&cln.iter().collect::<Vec<_>>())?,
        ids,
    })
}
