//! Images, paired datasets and a synthetic underwater degradation model.

mod degrade;
mod io;
mod pairs;

pub use degrade::{degrade, gaussian_blur, synth_texture, DegradeParams, DegradeRanges};
pub use io::{decode_ppm, encode_ppm, load_image, save_image};
pub use pairs::{sample_patches, Pair, PairBatch, PairSet};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// RGB image stored planar (`3 × H × W`), values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRGB {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl ImageRGB {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != 3 * height * width {
            return Err(Error::Data(format!(
                "{} values do not form a 3 × {height} × {width} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("image contains non-finite values".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * height * width);
        for v in rgb {
            data.extend(std::iter::repeat_n(v, height * width));
        }
        Self { height, width, data }
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn clamped(&self) -> Self {
        Self {
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..*self
        }
    }

    /// `1 × 1 × 3 × H × W` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(vec![1, 1, 3, self.height, self.width], self.data.clone()).expect("valid image")
    }

    /// Stacks same-sized images into `1 × B × 3 × H × W`.
    pub fn batch(images: &[&ImageRGB]) -> Result<Tensor> {
        let first = images.first().ok_or_else(|| Error::Data("empty batch".into()))?;
        let mut data = Vec::with_capacity(images.len() * first.data.len());
        for im in images {
            if (im.height, im.width) != (first.height, first.width) {
                return Err(Error::shape("batched images must share a size"));
            }
            data.extend_from_slice(&im.data);
        }
        Tensor::from_vec(vec![1, images.len(), 3, first.height, first.width], data)
    }

    /// Batch item `b` of a `1 × B × 3 × H × W` tensor.
    pub fn from_tensor(t: &Tensor, b: usize) -> Result<Self> {
        let d = t.dims5()?;
        if d.t != 1 || d.c != 3 || b >= d.b {
            return Err(Error::shape(format!("cannot take image {b} from {d}")));
        }
        let n = 3 * d.h * d.w;
        Self::new(d.h, d.w, t.data()[b * n..(b + 1) * n].to_vec())
    }

    /// Crop of size `h × w` at `(y, x)`, optionally mirrored left-right.
    pub fn crop(&self, y: usize, x: usize, h: usize, w: usize, flip: bool) -> Self {
        let mut data = Vec::with_capacity(3 * h * w);
        for c in 0..3 {
            for yy in 0..h {
                for xx in 0..w {
                    let sx = if flip { x + w - 1 - xx } else { x + xx };
                    data.push(self.at(c, y + yy, sx));
                }
            }
        }
        Self { height: h, width: w, data }
    }
}
