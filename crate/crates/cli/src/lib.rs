//! `evdvsr` command-line driver: dataset synthesis, training, evaluation,
//! inference, self-check and reporting.

pub mod data;
pub mod error;
pub mod eval;
pub mod infer;
pub mod plot;
pub mod report;
pub mod selfcheck;
pub mod settings;
pub mod simulate;
pub mod train;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, Result};
use evdvsr_model::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "evdvsr", version, about = "Event-assisted joint deblurring and video super-resolution")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable, applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Build a dataset from sharp image sequences or procedural clips.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Generate moving-shape clips instead of reading `sim.source`.
        #[arg(long)]
        synthetic: bool,
        #[arg(long)]
        clips: Option<usize>,
        /// Blurry frames per clip.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Train a model on `train.data`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        total_iters: Option<u64>,
        /// Continue from `<out>/latest.ckpt` when present.
        #[arg(long)]
        resume: bool,
        /// Stop after this iteration (the schedule still spans `total_iters`).
        #[arg(long)]
        stop_at: Option<u64>,
    },
    /// Score a checkpoint on a dataset and write image grids.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Score the ground truth against itself.
        #[arg(long)]
        gt_as_prediction: bool,
        /// LR tile edge; 0 processes whole frames.
        #[arg(long)]
        tile: Option<usize>,
    },
    /// Restore one clip directory to HR PNGs.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Clip directory (blur_lr/, events.bin, exposures.json).
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        /// Replace the clip's events with an empty stream.
        #[arg(long)]
        zero_events: bool,
        #[arg(long)]
        tile: Option<usize>,
    },
    /// Run every registered invariant check.
    Selfcheck {
        #[command(flatten)]
        common: Common,
        /// Inject a fault (test hook): dcn-clamp.
        #[arg(long = "break", value_name = "FAULT")]
        faults: Vec<String>,
    },
    /// Tables and plots from run directories or metric logs.
    Report {
        #[command(flatten)]
        common: Common,
        /// Run directory or log file; repeatable.
        #[arg(long = "input", value_name = "PATH", required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn path_value(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn config(common: &Common, extra: &[(&str, String)]) -> Result<RunConfig> {
    let env = std::env::var(settings::SEED_ENV).ok();
    settings::resolve(common.config.as_deref(), env.as_deref(), &common.set, extra)
}

fn out_dir(common: &Common) -> Result<&Path> {
    common.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.verb {
        Verb::Simulate {
            common,
            synthetic,
            clips,
            frames,
        } => {
            let mut extra = Vec::new();
            if synthetic {
                extra.push(("sim.synthetic", "true".to_string()));
            }
            extra.extend(clips.map(|c| ("sim.clips", c.to_string())));
            extra.extend(frames.map(|f| ("sim.frames", f.to_string())));
            let cfg = config(&common, &extra)?;
            let out = out_dir(&common)?;
            let m = simulate::run(&cfg, out)?;
            println!("wrote {} clips to {}", m.clips.len(), out.display());
        }
        Verb::Train {
            common,
            total_iters,
            resume,
            stop_at,
        } => {
            let extra: Vec<_> = total_iters.map(|t| ("train.total_iters", t.to_string())).into_iter().collect();
            let cfg = config(&common, &extra)?;
            let out = out_dir(&common)?;
            let it = train::run(&cfg, out, resume, stop_at)?;
            println!("stopped at iteration {it}; checkpoints in {}", out.display());
        }
        Verb::Eval {
            common,
            checkpoint,
            data,
            gt_as_prediction,
            tile,
        } => {
            let mut extra = Vec::new();
            extra.extend(checkpoint.map(|p| ("eval.checkpoint", path_value(&p))));
            extra.extend(data.map(|p| ("eval.data", path_value(&p))));
            if gt_as_prediction {
                extra.push(("eval.gt_as_prediction", "true".into()));
            }
            extra.extend(tile.map(|t| ("eval.tile", t.to_string())));
            let cfg = config(&common, &extra)?;
            let out = out_dir(&common)?;
            let ev = eval::run(&cfg, out)?;
            let mode = if cfg.eval.frame_weighted {
                evdvsr_core::metrics::Aggregation::FrameWeighted
            } else {
                evdvsr_core::metrics::Aggregation::PerClip
            };
            print!("{}", ev.model.to_table(mode));
        }
        Verb::Infer {
            common,
            checkpoint,
            input,
            zero_events,
            tile,
        } => {
            let mut extra = Vec::new();
            extra.extend(checkpoint.map(|p| ("eval.checkpoint", path_value(&p))));
            if zero_events {
                extra.push(("eval.zero_events", "true".into()));
            }
            extra.extend(tile.map(|t| ("eval.tile", t.to_string())));
            let cfg = config(&common, &extra)?;
            let out = out_dir(&common)?;
            let n = infer::run(&cfg, &input, out)?;
            println!("wrote {n} frames to {}", out.display());
        }
        Verb::Selfcheck { common, faults } => {
            if common.config.is_some() {
                config(&common, &[])?;
            }
            selfcheck::run(&faults, common.out.as_deref())?;
        }
        Verb::Report { common, inputs } => {
            let out = out_dir(&common)?;
            report::run(&inputs, out)?;
        }
    }
    Ok(())
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("evdvsr: {e}");
            e.code()
        }
    }
}
