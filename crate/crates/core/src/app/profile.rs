//! Energy profiling of a trained model on sample images.

use std::fmt::Write as _;

use crate::autograd::ParamStore;
use crate::data::ImageRGB;
use crate::energy::{profile, td_sweep, EnergyLedger};
use crate::error::{Error, Result};
use crate::network::Uiesnn;

pub struct EnergyOutput {
    pub ledger: EnergyLedger,
    /// `((T, D), total pJ)` per grid cell when a sweep was requested.
    pub sweep: Option<Vec<((usize, usize), f64)>>,
}

impl EnergyOutput {
    pub fn render(&self) -> String {
        let mut s = self.ledger.report();
        if let Some(rows) = &self.sweep {
            s.push_str("\nT x D sweep (firing rates frozen)\n");
            for ((t, d), pj) in rows {
                let _ = writeln!(s, "{t}x{d}: {:.6} mJ", pj * 1e-9);
            }
        }
        s
    }
}

/// Centre-crops all images to their common size (rounded down to a multiple
/// of 4), batches them and bills one instrumented forward.
pub fn profile_images(model: &Uiesnn, store: &mut ParamStore, images: &[ImageRGB]) -> Result<EnergyLedger> {
    let h = images.iter().map(|i| i.height).min().ok_or_else(|| Error::Data("no sample images".into()))? / 4 * 4;
    let w = images.iter().map(|i| i.width).min().unwrap_or(0) / 4 * 4;
    if h == 0 || w == 0 {
        return Err(Error::Data("sample images must be at least 4×4".into()));
    }
    let crops: Vec<ImageRGB> = images
        .iter()
        .map(|i| i.crop((i.height - h) / 2, (i.width - w) / 2, h, w, false))
        .collect();
    let batch = ImageRGB::batch(&crops.iter().collect::<Vec<_>>())?;
    profile(model, store, &batch)
}

pub fn energy_report(model: &Uiesnn, store: &mut ParamStore, images: &[ImageRGB], sweep: bool) -> Result<EnergyOutput> {
    let ledger = profile_images(model, store, images)?;
    let sweep = if sweep { Some(td_sweep(&ledger)?) } else { None };
    Ok(EnergyOutput { ledger, sweep })
}
