//! Dataset synthesis from sharp image sequences or procedural clips.

use std::path::Path;

use evdvsr_core::dataset::{self, ClipEntry, Manifest};
use evdvsr_core::frame::load_png;
use evdvsr_core::sample::{build_clip, BuiltClip, ExposurePlan, SampleParams, SharpClip};
use evdvsr_core::synth::{SyntheticClip, SyntheticSpec, FRAME_INTERVAL_US};
use evdvsr_model::RunConfig;

use crate::error::{io_err, CliError, Result};

pub const GENERATOR_VERSION: &str = "moving-shapes/1";

fn clip_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn synthetic_spec(cfg: &RunConfig) -> SyntheticSpec {
    let s = &cfg.sim;
    SyntheticSpec {
        hr_height: s.hr_height,
        hr_width: s.hr_width,
        frames: s.frames,
        min_frames_per_exposure: s.min_frames_per_exposure,
        max_frames_per_exposure: s.max_frames_per_exposure,
        gap_frames: s.gap_frames,
        min_speed: s.min_speed,
        max_speed: s.max_speed,
        objects: s.objects,
    }
}

fn source_clip(dir: &Path) -> Result<SharpClip> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err(dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let frames = paths.iter().map(|p| load_png(p)).collect::<evdvsr_core::Result<Vec<_>>>()?;
    let timestamps = (0..frames.len() as i64).map(|i| i * FRAME_INTERVAL_US).collect();
    Ok(SharpClip { frames, timestamps })
}

/// Write a dataset under `out` and return its manifest.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let s = &cfg.sim;
    let params = SampleParams {
        scale: cfg.model.scale,
        bins: cfg.model.bins,
        theta: s.theta,
    };
    std::fs::create_dir_all(out).map_err(io_err(out.display()))?;
    let mut built: Vec<(String, BuiltClip, usize)> = Vec::new();
    let (plan_text, generator) = if s.synthetic {
        if s.hr_height % cfg.model.scale != 0 || s.hr_width % cfg.model.scale != 0 {
            return Err(CliError::Usage(format!(
                "sim HR size {}x{} is not divisible by scale {}",
                s.hr_height, s.hr_width, cfg.model.scale
            )));
        }
        let spec = synthetic_spec(cfg);
        for i in 0..s.clips {
            let clip = SyntheticClip::generate(&spec, clip_seed(s.seed, i))?;
            let b = build_clip(&clip, &clip.plan, params)?;
            built.push((format!("clip_{i:03}"), b, clip.frames_per_exposure));
        }
        (
            format!(
                "uniform; {}-{} sharp frames per exposure drawn per clip; gap {}",
                s.min_frames_per_exposure, s.max_frames_per_exposure, s.gap_frames
            ),
            format!(
                "{GENERATOR_VERSION}; {} objects; speed {}-{} HR px per sharp frame; {} fps",
                s.objects,
                s.min_speed,
                s.max_speed,
                1_000_000 / FRAME_INTERVAL_US
            ),
        )
    } else {
        let root = Path::new(&s.source);
        if s.source.is_empty() {
            return Err(CliError::Usage("sim.source is not set (or pass --synthetic)".into()));
        }
        let mut dirs: Vec<_> = std::fs::read_dir(root)
            .map_err(io_err(root.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        if dirs.is_empty() {
            return Err(CliError::Data(format!("no clip directories under {}", root.display())));
        }
        let plan = ExposurePlan::uniform(s.frames, s.exposure_frames, s.gap_frames)?;
        for d in &dirs {
            let clip = source_clip(d)?;
            let b = build_clip(&clip, &plan, params).map_err(|e| CliError::Data(format!("{}: {e}", d.display())))?;
            built.push((crate::data::clip_name(d), b, s.exposure_frames));
        }
        (
            format!("uniform; {} sharp frames per exposure; gap {}", s.exposure_frames, s.gap_frames),
            format!("image sequences from {}", root.display()),
        )
    };
    let (lr_height, lr_width) = built.first().map(|(_, b, _)| b.sample.inputs.lr_size()).unwrap_or((0, 0));
    let mut clips = Vec::with_capacity(built.len());
    for (name, b, fpe) in &built {
        dataset::write_clip(&out.join(name), b)?;
        clips.push(ClipEntry {
            name: name.clone(),
            frames: b.exposures.len(),
            frames_per_exposure: *fpe,
            events: b.lr_events.len(),
        });
    }
    let manifest = Manifest {
        seed: s.seed,
        theta: s.theta,
        scale: cfg.model.scale,
        bins: cfg.model.bins,
        lr_height,
        lr_width,
        exposure_plan: plan_text,
        generator,
        clips,
    };
    manifest.write(out)?;
    Ok(manifest)
}
