//! On-disk dataset layout:
//!
//! ```text
//! <root>/manifest.json
//! <root>/<clip>/blur_lr/%06d.png
//! <root>/<clip>/sharp_hr/%06d.png
//! <root>/<clip>/events.bin       LR events (network input)
//! <root>/<clip>/events_hr.bin    HR events (edge masks for the loss)
//! <root>/<clip>/exposures.json
//! ```

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::events::{read_binary, write_binary, EventStream, ExposureWindow};
use crate::frame::{load_png, save_png, Frame};
use crate::sample::{assemble_edge_masks, assemble_inputs, BuiltClip, ClipInputs, SequenceSample};

pub const MANIFEST: &str = "manifest.json";
pub const EXPOSURES: &str = "exposures.json";
pub const EVENTS: &str = "events.bin";
pub const EVENTS_HR: &str = "events_hr.bin";
pub const BLUR_DIR: &str = "blur_lr";
pub const SHARP_DIR: &str = "sharp_hr";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub name: String,
    pub frames: usize,
    pub frames_per_exposure: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub theta: f64,
    pub scale: usize,
    pub bins: usize,
    pub lr_height: usize,
    pub lr_width: usize,
    pub exposure_plan: String,
    pub generator: String,
    pub clips: Vec<ClipEntry>,
}

impl Manifest {
    pub fn write(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "manifest",
            detail: e.to_string(),
        })
    }
}

pub fn frame_name(index: usize) -> String {
    format!("{index:06}.png")
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_events(stream: &EventStream, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_binary(stream, &mut out)?;
    std::io::Write::flush(&mut out).map_err(|e| Error::io(path, e))
}

pub fn read_events(path: &Path) -> Result<EventStream> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_binary(BufReader::new(file))
}

pub fn write_clip(dir: &Path, clip: &BuiltClip) -> Result<()> {
    let blur = dir.join(BLUR_DIR);
    let sharp = dir.join(SHARP_DIR);
    create_dir(&blur)?;
    create_dir(&sharp)?;
    for (i, f) in clip.sample.inputs.blurry_lr.iter().enumerate() {
        save_png(f.view(), &blur.join(frame_name(i)))?;
    }
    for (i, f) in clip.sample.sharp_hr.iter().enumerate() {
        save_png(f.view(), &sharp.join(frame_name(i)))?;
    }
    write_events(&clip.lr_events, &dir.join(EVENTS))?;
    write_events(&clip.hr_events, &dir.join(EVENTS_HR))?;
    let path = dir.join(EXPOSURES);
    let text = serde_json::to_string_pretty(&clip.exposures).expect("exposures serialize");
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn read_exposures(dir: &Path) -> Result<Vec<ExposureWindow>> {
    let path = dir.join(EXPOSURES);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "exposures.json",
        detail: e.to_string(),
    })
}

/// Frames `000000.png ..` of one sequence directory.
pub fn read_frames(dir: &Path, count: usize) -> Result<Vec<Frame>> {
    (0..count).map(|i| load_png(&dir.join(frame_name(i)))).collect()
}

fn count_pngs(dir: &Path) -> Result<usize> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut n = 0;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().extension().is_some_and(|x| x == "png") {
            n += 1;
        }
    }
    Ok(n)
}

/// Load only what the network needs. `events.bin` is mandatory.
pub fn read_clip_inputs(dir: &Path, bins: usize, scale: usize) -> Result<ClipInputs> {
    let exposures = read_exposures(dir)?;
    let events_path = dir.join(EVENTS);
    ensure!(events_path.exists(), "missing {}", events_path.display());
    let blurry = read_frames(&dir.join(BLUR_DIR), exposures.len())?;
    let events = read_events(&events_path)?;
    assemble_inputs(blurry, &events, &exposures, bins, scale)
}

pub fn read_clip(dir: &Path, bins: usize, scale: usize) -> Result<SequenceSample> {
    let inputs = read_clip_inputs(dir, bins, scale)?;
    let exposures = read_exposures(dir)?;
    let sharp_hr = read_frames(&dir.join(SHARP_DIR), exposures.len())?;
    let hr_events = read_events(&dir.join(EVENTS_HR))?;
    let edge_masks = assemble_edge_masks(&hr_events, &exposures, bins)?;
    let sample = SequenceSample {
        inputs,
        sharp_hr,
        edge_masks,
    };
    sample.validate()?;
    Ok(sample)
}

/// Clip directories under `root`, sorted by name.
pub fn list_clips(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() && path.join(EXPOSURES).exists() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Cross-check a dataset directory against its manifest.
pub fn audit(root: &Path) -> Result<Manifest> {
    let manifest = Manifest::read(root)?;
    for entry in &manifest.clips {
        let dir = root.join(&entry.name);
        let exposures = read_exposures(&dir)?;
        ensure!(
            exposures.len() == entry.frames,
            "{}: manifest says {} frames, exposures.json has {}",
            entry.name,
            entry.frames,
            exposures.len()
        );
        for sub in [BLUR_DIR, SHARP_DIR] {
            let n = count_pngs(&dir.join(sub))?;
            ensure!(n == entry.frames, "{}/{sub}: {n} PNGs, expected {}", entry.name, entry.frames);
        }
        let events = read_events(&dir.join(EVENTS))?;
        ensure!(
            events.len() == entry.events,
            "{}: {} events on disk, manifest says {}",
            entry.name,
            events.len(),
            entry.events
        );
    }
    Ok(manifest)
}
