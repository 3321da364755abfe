use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uiesnn::app::{self, ablation_table, dump_spikemaps, energy_report, evaluate_pairs, run_ablation};
use uiesnn::config::TrainConfig;
use uiesnn::data::{load_image, PairSet};
use uiesnn::network::load_checkpoint;
use uiesnn::{Error, Result};

#[derive(Parser)]
#[command(name = "uiesnn", version, about = "Spiking underwater image enhancement")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a configuration file.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Paired data root (`input/`, `gt/`); overrides the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rerun a training job from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on paired data.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for `eval.csv`, `summary.txt` and restored images.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write restored images.
        #[arg(long)]
        dump: bool,
    },
    /// Estimate inference energy from measured firing rates.
    Energy {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Image, image directory or paired root; synthetic images if omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Directory for `energy.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Re-bill at T x D in {1x1, 1x4, 4x1, 4x4}.
        #[arg(long)]
        td_sweep: bool,
    },
    /// Train and compare the four component configurations.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump branch spike maps of one pooling block as PGM images.
    Spikemap {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input image.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pooling block index, encoder first.
        #[arg(long, default_value_t = 0)]
        block: usize,
    },
    /// Write a synthetic paired dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 96)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn resolve_config(config: Option<&Path>, data: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(d) = data {
        cfg.data.root = Some(d);
    }
    if let Some(o) = out {
        cfg.run.out_dir = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    // re-validate after overrides
    TrainConfig::parse_str(&cfg.to_toml(), "command line", Path::new("."))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { config, data, out, seed } => {
            let cfg = resolve_config(config.as_deref(), data, out, seed)?;
            let o = app::train(&cfg)?;
            let last = o.rows.last().expect("at least one iteration");
            println!(
                "trained {} iterations: total loss {:.6} -> {:.6}",
                o.rows.len(),
                o.rows[0].total,
                last.total
            );
            println!("checkpoint: {}", o.checkpoint.display());
            println!("log: {}", o.log.display());
        }
        Command::Replay { manifest, out } => {
            let o = app::replay(&manifest, &out)?;
            println!("replayed {} iterations into {}", o.rows.len(), o.out_dir.display());
        }
        Command::Eval { checkpoint, data, out, dump } => {
            let (model, mut store, _) = load_checkpoint(&checkpoint)?;
            let (set, warnings) = PairSet::load_dir(&data)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let dump_dir = match (&out, dump) {
                (Some(o), true) => Some(o.join("restored")),
                (None, true) => return Err(Error::Usage("--dump requires --out".into())),
                _ => None,
            };
            let report = evaluate_pairs(&model, &mut store, &set, dump_dir.as_deref())?;
            print!("{}", report.summary());
            println!("warnings: {}", warnings.len());
            if let Some(o) = out {
                write(&o.join("eval.csv"), &report.to_csv())?;
                write(&o.join("summary.txt"), &report.summary())?;
            }
        }
        Command::Energy { checkpoint, data, out, seed, td_sweep } => {
            let (model, mut store, _) = load_checkpoint(&checkpoint)?;
            let images = match data {
                Some(p) => app::load_inputs(&p)?,
                None => PairSet::synthetic(4, 64, 64, seed.unwrap_or(0)).pairs.into_iter().map(|p| p.degraded).collect(),
            };
            let rep = energy_report(&model, &mut store, &images, td_sweep)?;
            print!("{}", rep.render());
            if let Some(o) = out {
                write(&o.join("energy.csv"), &rep.ledger.to_csv())?;
            }
        }
        Command::Ablate { config, data, out, seed } => {
            let cfg = resolve_config(config.as_deref(), data, out, seed)?;
            let rows = run_ablation(&cfg)?;
            let table = ablation_table(&rows);
            print!("{table}");
            write(&cfg.run.out_dir.join("ablation.txt"), &table)?;
        }
        Command::Spikemap { checkpoint, data, out, block } => {
            let (model, mut store, _) = load_checkpoint(&checkpoint)?;
            let img = load_image(&data)?;
            let files = dump_spikemaps(&model, &mut store, &img.to_tensor(), block, &out)?;
            println!("wrote {} spike maps under {}", files.len(), out.display());
        }
        Command::Synth { out, count, size, seed } => {
            let n = app::write_synthetic(&out, count, size, seed)?;
            println!("wrote {n} pairs under {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(app::exit_code(&e) as u8)
        }
    }
}
