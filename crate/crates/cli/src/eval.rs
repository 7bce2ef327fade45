use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use evdvsr_core::dataset::{frame_name, list_clips};
use evdvsr_core::frame::{clamp_unit, hstack, save_png, Frame};
use evdvsr_core::metrics::{evaluate_clip, Aggregation, MetricReport};
use evdvsr_model::batch::bicubic_frames;
use evdvsr_model::checkpoint::Checkpoint;
use evdvsr_model::config::{toggle_hash, toggle_summary};
use evdvsr_model::infer::restore;
use evdvsr_model::RunConfig;

use crate::data::{self, clip_name, required_dir};
use crate::error::{io_err, CliError, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const BICUBIC_FILE: &str = "bicubic.csv";
pub const TABLE_FILE: &str = "metrics.txt";
pub const GRID_DIR: &str = "grids";

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model: MetricReport,
    pub bicubic: MetricReport,
}

/// `# key = value` lines that identify the run a metric log came from.
pub fn header(cfg: &RunConfig, checkpoint: &str) -> String {
    let mut h = String::new();
    writeln!(h, "# checkpoint = {checkpoint}").unwrap();
    writeln!(h, "# config_hash = {}", cfg.model.hash()).unwrap();
    writeln!(h, "# toggles = {}", toggle_summary(cfg)).unwrap();
    writeln!(h, "# toggle_hash = {}", toggle_hash(cfg)).unwrap();
    h
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path.display()))
}

fn bicubic_baseline(blurry: &[Frame], scale: usize) -> Result<Vec<Frame>> {
    let mut b = bicubic_frames(blurry, scale)?;
    b.iter_mut().for_each(clamp_unit);
    Ok(b)
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<Evaluation> {
    let e = &cfg.eval;
    let root = required_dir(&e.data, "eval.data")?;
    let (net, run_cfg) = if e.checkpoint.is_empty() {
        if !e.gt_as_prediction {
            return Err(CliError::Usage("eval.checkpoint is not set".into()));
        }
        (None, cfg.clone())
    } else {
        let ck = Checkpoint::load(Path::new(&e.checkpoint))?;
        let (net, _store) = ck.network()?;
        let mut c = ck.config.clone();
        c.eval = cfg.eval.clone();
        (Some(net), c)
    };
    let model = &run_cfg.model;
    data::check_geometry(&root, model)?;
    fs::create_dir_all(out).map_err(io_err(out.display()))?;
    let mut ev = Evaluation {
        model: MetricReport::default(),
        bicubic: MetricReport::default(),
    };
    let dirs = list_clips(&root)?;
    if dirs.is_empty() {
        return Err(CliError::Data(format!("no clips under {}", root.display())));
    }
    for dir in &dirs {
        let name = clip_name(dir);
        let s = data::read_sample(dir, model, e.zero_events)?;
        let bic = bicubic_baseline(&s.inputs.blurry_lr, model.scale)?;
        let pred = match &net {
            Some(net) if !e.gt_as_prediction => restore(net, &s.inputs, e.tile, e.tile_overlap)?,
            _ => s.sharp_hr.clone(),
        };
        ev.model.push(evaluate_clip(&name, &pred, &s.sharp_hr)?);
        ev.bicubic.push(evaluate_clip(&name, &bic, &s.sharp_hr)?);
        if e.grids {
            let gdir = out.join(GRID_DIR).join(&name);
            fs::create_dir_all(&gdir).map_err(io_err(gdir.display()))?;
            for (i, ((b, p), g)) in bic.iter().zip(&pred).zip(&s.sharp_hr).enumerate() {
                save_png(hstack(&[b.view(), p.view(), g.view()])?.view(), &gdir.join(frame_name(i)))?;
            }
        }
    }
    let mode = if e.frame_weighted { Aggregation::FrameWeighted } else { Aggregation::PerClip };
    let source = if e.gt_as_prediction { "ground-truth" } else { e.checkpoint.as_str() };
    let head = header(&run_cfg, source);
    write(&out.join(METRICS_FILE), &(head.clone() + &ev.model.to_lines(mode)))?;
    write(&out.join(BICUBIC_FILE), &(header(&run_cfg, "bicubic") + &ev.bicubic.to_lines(mode)))?;
    let table = format!(
        "model ({source})\n{}\nbicubic\n{}",
        ev.model.to_table(mode),
        ev.bicubic.to_table(mode)
    );
    write(&out.join(TABLE_FILE), &table)?;
    Ok(ev)
}
