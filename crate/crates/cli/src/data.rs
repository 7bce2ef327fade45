use std::path::{Path, PathBuf};

use evdvsr_core::dataset::{self, Manifest, BLUR_DIR, EVENTS};
use evdvsr_core::events::EventStream;
use evdvsr_core::sample::{assemble_inputs, ClipInputs, SequenceSample};
use evdvsr_model::ModelConfig;

use crate::error::{CliError, Result};

pub fn required_dir(value: &str, key: &str) -> Result<PathBuf> {
    if value.is_empty() {
        return Err(CliError::Usage(format!("{key} is not set")));
    }
    Ok(PathBuf::from(value))
}

/// Refuse datasets whose scale the model cannot produce.
pub fn check_geometry(root: &Path, model: &ModelConfig) -> Result<Manifest> {
    let m = Manifest::read(root)?;
    if m.scale != model.scale {
        return Err(CliError::Data(format!(
            "geometry mismatch: dataset {} has scale {}, model expects {}",
            root.display(),
            m.scale,
            model.scale
        )));
    }
    if m.lr_height % 4 != 0 || m.lr_width % 4 != 0 {
        return Err(CliError::Data(format!(
            "geometry mismatch: LR size {}x{} is not a multiple of 4",
            m.lr_height, m.lr_width
        )));
    }
    Ok(m)
}

pub fn clip_name(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Network inputs of one clip directory. With `zero_events` the event file
/// must still exist but its contents are replaced by an empty stream.
pub fn read_inputs(dir: &Path, model: &ModelConfig, zero_events: bool) -> Result<ClipInputs> {
    if !zero_events {
        return Ok(dataset::read_clip_inputs(dir, model.bins, model.scale)?);
    }
    let exposures = dataset::read_exposures(dir)?;
    let path = dir.join(EVENTS);
    if !path.exists() {
        return Err(CliError::Data(format!("missing {}", path.display())));
    }
    let ev = dataset::read_events(&path)?;
    let empty = EventStream::empty(ev.width(), ev.height(), ev.t_min(), ev.t_max());
    let blurry = dataset::read_frames(&dir.join(BLUR_DIR), exposures.len())?;
    Ok(assemble_inputs(blurry, &empty, &exposures, model.bins, model.scale)?)
}

pub fn read_sample(dir: &Path, model: &ModelConfig, zero_events: bool) -> Result<SequenceSample> {
    let mut s = dataset::read_clip(dir, model.bins, model.scale)?;
    if zero_events {
        s.inputs = read_inputs(dir, model, true)?;
    }
    Ok(s)
}

/// Every clip of a dataset, in name order.
pub fn load(root: &Path, model: &ModelConfig) -> Result<Vec<(String, SequenceSample)>> {
    check_geometry(root, model)?;
    let dirs = dataset::list_clips(root)?;
    if dirs.is_empty() {
        return Err(CliError::Data(format!("no clips under {}", root.display())));
    }
    dirs.iter().map(|d| Ok((clip_name(d), read_sample(d, model, false)?))).collect()
}
