//! Spike-map dumps as 8-bit grayscale PGM grids.
//!
//! A captured spike tensor `T × B × C × h × w` becomes one image per
//! timestep for the first batch item: channels are tiled row-major on a grid
//! with `⌈√C⌉` columns, each tile upsampled (nearest) to the block's
//! resolution. Spike level `v ∈ [0, 1]` maps to `round(255·v)`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Gray {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::format(pos as u64, "truncated PGM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "P5" || fields[3] != "255" {
            return Err(Error::format(0, "not an 8-bit binary PGM"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(0, "bad PGM dimensions"));
        let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
        let pixels = bytes
            .get(pos..pos + width * height)
            .ok_or_else(|| Error::format(bytes.len() as u64, "truncated PGM payload"))?
            .to_vec();
        Ok(Self { width, height, pixels })
    }
}

/// Tiles channel maps of `spikes[t, 0]` into a grid at `out_h × out_w` per tile.
pub fn spike_grid(spikes: &Tensor, t: usize, out_h: usize, out_w: usize) -> Result<Gray> {
    let d = spikes.dims5()?;
    if t >= d.t || out_h < d.h || out_w < d.w {
        return Err(Error::param("spike grid target smaller than the map or timestep out of range"));
    }
    let cols = (d.c as f64).sqrt().ceil() as usize;
    let rows = d.c.div_ceil(cols);
    let (width, height) = (cols * out_w, rows * out_h);
    let mut pixels = vec![0u8; width * height];
    for c in 0..d.c {
        let (r0, c0) = ((c / cols) * out_h, (c % cols) * out_w);
        for y in 0..out_h {
            for x in 0..out_w {
                let v = spikes.at5(t, 0, c, y * d.h / out_h, x * d.w / out_w);
                pixels[(r0 + y) * width + c0 + x] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
    }
    Ok(Gray { width, height, pixels })
}

/// Writes `{outdir}/{block}/{branch}_t{t}.pgm` for every timestep, `t` from 1.
pub fn dump(outdir: &Path, block: &str, branch: &str, spikes: &Tensor, out_h: usize, out_w: usize) -> Result<Vec<PathBuf>> {
    let dir = outdir.join(block);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let d = spikes.dims5()?;
    let mut written = Vec::with_capacity(d.t);
    for t in 0..d.t {
        let path = dir.join(format!("{branch}_t{}.pgm", t + 1));
        let grid = spike_grid(spikes, t, out_h, out_w)?;
        fs::write(&path, grid.to_pgm()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
