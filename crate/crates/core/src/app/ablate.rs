//! Component ablation: the same budget and seed with blocks toggled.

use std::fmt::Write as _;

use super::{evaluate_pairs, holdout_set, train};
use crate::blocks::Toggles;
use crate::config::TrainConfig;
use crate::error::Result;

/// Rows in table order: none, FDM, FDM + MDA, all three.
pub const ABLATION_ROWS: [(&str, Toggles); 4] = [
    ("(a)", Toggles::NONE),
    (
        "(b)",
        Toggles {
            fdm: true,
            mda: false,
            mplb: false,
        },
    ),
    (
        "(c)",
        Toggles {
            fdm: true,
            mda: true,
            mplb: false,
        },
    ),
    ("full", Toggles::ALL),
];

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub toggles: Toggles,
    pub params: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Trains and evaluates every row; row `i` writes to `{out_dir}/row{i}`.
pub fn run_ablation(cfg: &TrainConfig) -> Result<Vec<AblationRow>> {
    let holdout = holdout_set(cfg);
    let mut rows = Vec::with_capacity(ABLATION_ROWS.len());
    for (i, (label, toggles)) in ABLATION_ROWS.iter().enumerate() {
        let mut c = cfg.clone();
        c.net.toggles = *toggles;
        c.run.out_dir = cfg.run.out_dir.join(format!("row{i}"));
        log::info!("ablation row {label}");
        let mut out = train(&c)?;
        let report = evaluate_pairs(&out.model, &mut out.store, &holdout, None)?;
        rows.push(AblationRow {
            label: label.to_string(),
            toggles: *toggles,
            params: out.store.num_trainable(),
            psnr: report.mean_psnr,
            ssim: report.mean_ssim,
        });
    }
    Ok(rows)
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mark = |b: bool| if b { "x" } else { "-" };
    let mut s = format!("{:<6} {:>3} {:>3} {:>4} {:>10} {:>10} {:>8}\n", "row", "FDM", "MDA", "MPLB", "params", "PSNR", "SSIM");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6} {:>3} {:>3} {:>4} {:>10} {:>10.4} {:>8.4}",
            r.label,
            mark(r.toggles.fdm),
            mark(r.toggles.mda),
            mark(r.toggles.mplb),
            r.params,
            r.psnr,
            r.ssim
        );
    }
    s
}
