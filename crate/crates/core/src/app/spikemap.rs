//! Spike-map dumps for one multi-scale pooling block.

use std::path::{Path, PathBuf};

use crate::autograd::ParamStore;
use crate::blocks::{spikemap, Mplb};
use crate::error::{Error, Result};
use crate::layers::Probe;
use crate::network::{reflect_pad, Uiesnn};
use crate::tensor::Tensor;

/// Every pooling block in network order (encoder first).
pub fn mplb_instances(model: &Uiesnn) -> Vec<&Mplb> {
    model.srbs().filter_map(|s| s.mplb.as_ref()).collect()
}

/// Runs `image` and writes the four branch neurons of block `index` as
/// `{outdir}/{block}/SN{i}_t{t}.pgm`, each upsampled to the first branch size.
pub fn dump_spikemaps(model: &Uiesnn, store: &mut ParamStore, image: &Tensor, index: usize, outdir: &Path) -> Result<Vec<PathBuf>> {
    let blocks = mplb_instances(model);
    let Some(block) = blocks.get(index) else {
        let valid: Vec<String> = blocks.iter().enumerate().map(|(i, b)| format!("{i} ({})", b.name)).collect();
        return Err(Error::Usage(format!(
            "block index {index} out of range; valid indices: {}",
            if valid.is_empty() { "none (model has no pooling blocks)".to_string() } else { valid.join(", ") }
        )));
    };
    let d = image.dims5()?;
    let (ph, pw) = (d.h.div_ceil(4) * 4, d.w.div_ceil(4) * 4);
    let padded = if (ph, pw) == (d.h, d.w) { image.clone() } else { reflect_pad(image, ph, pw)? };
    let prefix = format!("{}.sn", block.name);
    let (_, probe) = model.forward_probed(store, &padded, Probe::capturing(prefix))?;
    let maps: Vec<&Tensor> = (0..4)
        .map(|i| {
            let label = block.spike_label(i + 1);
            probe
                .captured
                .iter()
                .find(|(l, _)| *l == label)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Data(format!("no spikes captured for {label}")))
        })
        .collect::<Result<_>>()?;
    let d0 = maps[0].dims5()?;
    let mut written = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        written.extend(spikemap::dump(outdir, &block.name, &format!("SN{}", i + 1), m, d0.h, d0.w)?);
    }
    Ok(written)
}
