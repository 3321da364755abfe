//! Synthetic underwater degradation and clean texture generation.
//!
//! `out = (1 − β)·(blur_σ(clean) ⊙ cast) + β·veil`, clamped to `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ImageRGB;
use crate::error::{Error, Result};
use crate::ops::reflect_index;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradeParams {
    /// Per-channel attenuation in `(0, 1]`.
    pub cast: [f32; 3],
    pub veil: [f32; 3],
    pub beta: f32,
    pub blur_sigma: f32,
    /// Seed the parameters were drawn from, kept for provenance.
    pub seed: u64,
}

impl DegradeParams {
    pub fn identity() -> Self {
        Self {
            cast: [1.0; 3],
            veil: [0.0; 3],
            beta: 0.0,
            blur_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cast.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::param("cast multipliers must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::param("veil mixing β must lie in [0, 1]"));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::param("blur σ must be finite and non-negative"));
        }
        Ok(())
    }

    /// Draws parameters from `ranges`, deterministically in `seed`.
    pub fn sample(ranges: &DegradeRanges, seed: u64) -> Self {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let mut c: [f32; 3] = std::array::from_fn(|_| rng.gen_range(ranges.cast.0..=ranges.cast.1));
        c.sort_by(f32::total_cmp);
        let cast = if rng.gen_bool(0.5) { [c[0], c[1], c[2]] } else { [c[0], c[2], c[1]] };
        let veil = std::array::from_fn(|i| rng.gen_range(ranges.veil[i].0..=ranges.veil[i].1));
        Self {
            cast,
            veil,
            beta: rng.gen_range(ranges.beta.0..=ranges.beta.1),
            blur_sigma: rng.gen_range(ranges.sigma.0..=ranges.sigma.1),
            seed,
        }
    }
}

/// Sampling intervals for synthetic degradations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradeRanges {
    pub cast: (f32, f32),
    pub beta: (f32, f32),
    pub sigma: (f32, f32),
    /// Veil colour interval per channel.
    pub veil: [(f32, f32); 3],
}

impl Default for DegradeRanges {
    fn default() -> Self {
        Self {
            cast: (0.4, 1.0),
            beta: (0.1, 0.5),
            sigma: (0.5, 2.0),
            veil: [(0.0, 0.25), (0.35, 0.7), (0.45, 0.85)],
        }
    }
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f32> = (-r..=r).map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f32 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with reflect padding, truncated at `3σ`.
pub fn gaussian_blur(img: &ImageRGB, sigma: f32) -> ImageRGB {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (h, w) = (img.height, img.width);
    let mut out = img.clone();
    let mut tmp = vec![0.0f32; h * w];
    for c in 0..3 {
        let src = img.plane(c);
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = k
                    .iter()
                    .enumerate()
                    .map(|(i, kv)| kv * src[y * w + reflect_index(x as isize + i as isize - r, w)])
                    .sum();
            }
        }
        let dst = &mut out.data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = k
                    .iter()
                    .enumerate()
                    .map(|(i, kv)| kv * tmp[reflect_index(y as isize + i as isize - r, h) * w + x])
                    .sum();
            }
        }
    }
    out
}

pub fn degrade(clean: &ImageRGB, p: &DegradeParams) -> ImageRGB {
    let blurred = gaussian_blur(clean, p.blur_sigma);
    let n = clean.height * clean.width;
    let mut out = blurred;
    for c in 0..3 {
        for v in &mut out.data[c * n..(c + 1) * n] {
            *v = ((1.0 - p.beta) * (*v * p.cast[c]) + p.beta * p.veil[c]).clamp(0.0, 1.0);
        }
    }
    out
}

/// Procedural clean image: a colour gradient overlaid with gratings and
/// flat-coloured discs and rectangles.
pub fn synth_texture(height: usize, width: usize, rng: &mut impl Rng) -> ImageRGB {
    let colour = |rng: &mut dyn rand::RngCore| -> [f32; 3] { std::array::from_fn(|_| rng.gen_range(0.15..0.95)) };
    let (c0, c1) = (colour(rng), colour(rng));
    let angle: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let n = height * width;
    let mut data = vec![0.0f32; 3 * n];
    let norm = |x: usize, y: usize| {
        let u = x as f32 / width as f32 - 0.5;
        let v = y as f32 / height as f32 - 0.5;
        (u * dx + v * dy + 0.71) / 1.42
    };
    for y in 0..height {
        for x in 0..width {
            let s = norm(x, y);
            for c in 0..3 {
                data[c * n + y * width + x] = c0[c] * (1.0 - s) + c1[c] * s;
            }
        }
    }
    for _ in 0..rng.gen_range(1..4) {
        let freq = rng.gen_range(0.05..0.5);
        let th: f32 = rng.gen_range(0.0..std::f32::consts::PI);
        let phase = rng.gen_range(0.0..std::f32::consts::TAU);
        let amp: [f32; 3] = std::array::from_fn(|_| rng.gen_range(-0.12..0.12));
        for y in 0..height {
            for x in 0..width {
                let s = ((x as f32 * th.cos() + y as f32 * th.sin()) * freq + phase).sin();
                for c in 0..3 {
                    data[c * n + y * width + x] += amp[c] * s;
                }
            }
        }
    }
    for _ in 0..rng.gen_range(2..7) {
        let col = colour(rng);
        let (cx, cy) = (rng.gen_range(0.0..width as f32), rng.gen_range(0.0..height as f32));
        let size = rng.gen_range(0.05..0.3) * width.min(height) as f32;
        let disc = rng.gen_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let (ex, ey) = (x as f32 - cx, y as f32 - cy);
                let inside = if disc {
                    ex * ex + ey * ey <= size * size
                } else {
                    ex.abs() <= size && ey.abs() <= 0.6 * size
                };
                if inside {
                    for c in 0..3 {
                        data[c * n + y * width + x] = col[c];
                    }
                }
            }
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    ImageRGB {
        height,
        width,
        data,
    }
}
