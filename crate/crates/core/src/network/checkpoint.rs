//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "UIES"                      magic
//! u32                         format version
//! u32 n, n bytes              network config as JSON
//! u64                         training step
//! u32                         record count
//! per record:
//!   u32 n, n bytes            tensor name (UTF-8)
//!   u32 rank, rank × u32      shape
//!   numel × f32               values
//! ```
//!
//! The whole file is parsed and checked against a freshly built model before
//! any state is touched.

use std::fs;
use std::path::Path;

use super::{NetConfig, Uiesnn};
use crate::autograd::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"UIES";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Parsed checkpoint contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: NetConfig,
    pub step: u64,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn capture(model: &Uiesnn, store: &ParamStore, step: u64) -> Self {
        Self {
            config: model.config().clone(),
            step,
            tensors: store.iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let cfg = serde_json::to_vec(&self.config).expect("config serialises");
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(&cfg);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format(0, "bad magic, not a checkpoint"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
        }
        let n = r.u32()? as usize;
        let at = r.pos;
        let config: NetConfig = serde_json::from_slice(r.take(n)?)
            .map_err(|e| Error::format(at as u64, format!("bad config block: {e}")))?;
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let n = r.u32()? as usize;
            let at = r.pos;
            let name = std::str::from_utf8(r.take(n)?)
                .map_err(|_| Error::format(at as u64, "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            let at = r.pos;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let raw = r.take(numel.checked_mul(4).ok_or_else(|| Error::format(at as u64, "shape overflow"))?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            let t = Tensor::from_vec(shape, data).map_err(|e| Error::format(at as u64, e.to_string()))?;
            tensors.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::format(r.pos as u64, "trailing bytes after last record"));
        }
        Ok(Self { config, step, tensors })
    }

    /// Builds the model the config describes and loads every tensor into it.
    pub fn instantiate(&self) -> Result<(Uiesnn, ParamStore)> {
        let mut store = ParamStore::new();
        let model = Uiesnn::new(self.config.clone(), &mut store, 0)?;
        self.apply(&mut store)?;
        Ok((model, store))
    }

    /// Copies the tensors into `store` after checking names and shapes of all
    /// of them; `store` is unchanged on error.
    pub fn apply(&self, store: &mut ParamStore) -> Result<()> {
        for (name, t) in &self.tensors {
            let p = store.by_name(name).ok_or_else(|| Error::IncompatibleCheckpoint {
                tensor: name.clone(),
                detail: "is not part of this model".into(),
            })?;
            if p.value.shape() != t.shape() {
                return Err(Error::IncompatibleCheckpoint {
                    tensor: name.clone(),
                    detail: format!("has shape {:?}, model expects {:?}", t.shape(), p.value.shape()),
                });
            }
        }
        if let Some(missing) = store.iter().find(|p| !self.tensors.iter().any(|(n, _)| n == &p.name)) {
            return Err(Error::IncompatibleCheckpoint {
                tensor: missing.name.clone(),
                detail: "is missing from the checkpoint".into(),
            });
        }
        for (name, t) in &self.tensors {
            store.set_value(name, t.clone())?;
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.bytes.len() as u64, "unexpected end of checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(path: &Path, model: &Uiesnn, store: &ParamStore, step: u64) -> Result<()> {
    let bytes = Checkpoint::capture(model, store, step).to_bytes();
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Uiesnn, ParamStore, u64)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ck = Checkpoint::from_bytes(&bytes)?;
    let (model, store) = ck.instantiate()?;
    Ok((model, store, ck.step))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetConfig {
        NetConfig {
            timesteps: 2,
            base_channels: 4,
            stage_layout: vec![1, 0, 1, 0, 1, 1],
            ..NetConfig::default()
        }
    }

    #[test]
    fn bytes_round_trip() {
        let mut store = ParamStore::new();
        let model = Uiesnn::new(tiny(), &mut store, 5).unwrap();
        let ck = Checkpoint::capture(&model, &store, 17);
        assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let mut store = ParamStore::new();
        let model = Uiesnn::new(tiny(), &mut store, 5).unwrap();
        let bytes = Checkpoint::capture(&model, &store, 0).to_bytes();
        for cut in (0..bytes.len()).step_by(97) {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Format { .. })), "cut {cut}");
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut store = ParamStore::new();
        let model = Uiesnn::new(tiny(), &mut store, 5).unwrap();
        let mut bytes = Checkpoint::capture(&model, &store, 0).to_bytes();
        bytes[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format { offset: 4, .. })));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn failed_apply_leaves_store_untouched() {
        let mut store = ParamStore::new();
        let model = Uiesnn::new(tiny(), &mut store, 5).unwrap();
        let mut ck = Checkpoint::capture(&model, &store, 0);
        for (_, t) in ck.tensors.iter_mut() {
            t.fill(0.5);
        }
        let last = ck.tensors.len() - 1;
        ck.tensors[last].1 = Tensor::zeros(&[1, 2, 3]);
        let before: Vec<Tensor> = store.iter().map(|p| p.value.clone()).collect();
        let err = ck.apply(&mut store).unwrap_err();
        assert!(matches!(err, Error::IncompatibleCheckpoint { ref tensor, .. } if *tensor == ck.tensors[last].0));
        let after: Vec<Tensor> = store.iter().map(|p| p.value.clone()).collect();
        assert_eq!(before, after);
    }
}
