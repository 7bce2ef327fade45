use std::fs;
use std::path::Path;

use evdvsr_core::dataset::frame_name;
use evdvsr_core::frame::save_png;
use evdvsr_model::checkpoint::Checkpoint;
use evdvsr_model::infer::restore;
use evdvsr_model::RunConfig;

use crate::data::{self, required_dir};
use crate::error::{io_err, Result};

/// Restore one clip directory into `out/%06d.png`; returns the frame count.
pub fn run(cfg: &RunConfig, input: &Path, out: &Path) -> Result<usize> {
    let ck = Checkpoint::load(&required_dir(&cfg.eval.checkpoint, "eval.checkpoint")?)?;
    let (net, _store) = ck.network()?;
    let inputs = data::read_inputs(input, &ck.config.model, cfg.eval.zero_events)?;
    let frames = restore(&net, &inputs, cfg.eval.tile, cfg.eval.tile_overlap)?;
    fs::create_dir_all(out).map_err(io_err(out.display()))?;
    for (i, f) in frames.iter().enumerate() {
        save_png(f.view(), &out.join(frame_name(i)))?;
    }
    Ok(frames.len())
}
