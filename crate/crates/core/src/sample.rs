//! Training-sample synthesis: blur by frame averaging, bicubic LR
//! generation, event simulation at LR and HR, voxelization and edge masks.

use std::ops::Range;

use ndarray::{Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::events::{
    segment_events, voxelize, EventSimulator, EventStream, ExposureWindow, TimeWindow, VoxelGrid, VoxelKind,
};
use crate::frame::{self, Frame};
use crate::resize::{downsample_bicubic, downsample_plane};

/// Running pixel-wise mean, accumulated in `f64`.
#[derive(Debug, Clone)]
pub struct BlurAccumulator {
    sum: Option<Array3<f64>>,
    count: usize,
}

impl Default for BlurAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl BlurAccumulator {
    pub fn new() -> Self {
        BlurAccumulator { sum: None, count: 0 }
    }

    pub fn add(&mut self, frame: ArrayView3<f32>) -> Result<()> {
        match &mut self.sum {
            None => self.sum = Some(frame.mapv(f64::from)),
            Some(sum) => {
                ensure!(
                    sum.dim() == frame.dim(),
                    "frame shape {:?} differs from {:?}",
                    frame.dim(),
                    sum.dim()
                );
                sum.zip_mut_with(&frame, |s, &v| *s += f64::from(v));
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<Frame> {
        let n = self.count as f64;
        let sum = self.sum.ok_or_else(|| crate::Error::invalid("cannot blur an empty frame set"))?;
        Ok(sum.mapv(|s| (s / n) as f32))
    }
}

/// Average the sharp frames of one exposure.
pub fn synthesize_blur(frames: &[ArrayView3<f32>]) -> Result<Frame> {
    let mut acc = BlurAccumulator::new();
    for f in frames {
        acc.add(f.view())?;
    }
    acc.finish()
}

/// Edge weight map for the edge-enhanced loss: the bin-summed HR voxel grid
/// of the intra-exposure events, normalized by its largest magnitude, taken
/// in absolute value and replicated over 3 channels.
pub fn hr_edge_mask(
    events: &[crate::events::Event],
    window: TimeWindow,
    bins: usize,
    height: usize,
    width: usize,
) -> Result<Frame> {
    let grid = voxelize(events, window, bins, width, height, VoxelKind::Intra)?;
    let signed = grid.bin_sum();
    let peak = signed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let plane = if peak > 0.0 {
        signed.mapv(|v| (v / peak).abs() as f32)
    } else {
        signed.mapv(|_| 0.0f32)
    };
    Ok(frame::gray_to_rgb(plane.view()))
}

/// Which sharp frames are averaged into each blurry frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposurePlan {
    pub exposures: Vec<Range<usize>>,
}

impl ExposurePlan {
    /// `count` exposures of `frames_per_exposure` sharp frames separated by
    /// `gap` unused frames.
    pub fn uniform(count: usize, frames_per_exposure: usize, gap: usize) -> Result<Self> {
        ensure!(count >= 1 && frames_per_exposure >= 2, "exposure plan needs >= 1 exposure of >= 2 frames");
        let stride = frames_per_exposure + gap;
        Ok(ExposurePlan {
            exposures: (0..count).map(|i| i * stride..i * stride + frames_per_exposure).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.exposures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exposures.is_empty()
    }

    pub fn frames_needed(&self) -> usize {
        self.exposures.iter().map(|r| r.end).max().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        ensure!(!self.exposures.is_empty(), "empty exposure plan");
        for r in &self.exposures {
            ensure!(r.end >= r.start + 2, "exposure {r:?} must span at least 2 sharp frames");
        }
        for w in self.exposures.windows(2) {
            ensure!(w[0].end <= w[1].start, "exposures {:?} and {:?} overlap", w[0], w[1]);
        }
        Ok(())
    }

    /// Sharp frame used as ground truth: the middle of the exposure.
    pub fn reference_frame(range: &Range<usize>) -> usize {
        range.start + (range.end - range.start) / 2
    }
}

/// A high-frame-rate sharp RGB source.
pub trait FrameSource {
    fn len(&self) -> usize;
    fn frame(&self, index: usize) -> Result<Frame>;
    /// Microseconds.
    fn timestamp(&self, index: usize) -> i64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-memory sharp clip.
#[derive(Debug, Clone)]
pub struct SharpClip {
    pub frames: Vec<Frame>,
    pub timestamps: Vec<i64>,
}

impl FrameSource for SharpClip {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        Ok(self.frames[index].clone())
    }

    fn timestamp(&self, index: usize) -> i64 {
        self.timestamps[index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub scale: usize,
    pub bins: usize,
    pub theta: f64,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            scale: 4,
            bins: 5,
            theta: 0.15,
        }
    }
}

/// Network inputs for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipInputs {
    pub blurry_lr: Vec<Frame>,
    pub intra_voxels: Vec<VoxelGrid>,
    pub fwd_voxels: Vec<VoxelGrid>,
    pub bwd_voxels: Vec<VoxelGrid>,
    pub scale: usize,
}

impl ClipInputs {
    pub fn len(&self) -> usize {
        self.blurry_lr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blurry_lr.is_empty()
    }

    /// `(height, width)` at LR resolution.
    pub fn lr_size(&self) -> (usize, usize) {
        let (_, h, w) = self.blurry_lr[0].dim();
        (h, w)
    }

    pub fn bins(&self) -> usize {
        self.intra_voxels.first().map_or(0, VoxelGrid::bins)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.blurry_lr.len();
        ensure!(t >= 1, "clip has no frames");
        ensure!(
            self.intra_voxels.len() == t && self.fwd_voxels.len() + 1 == t && self.bwd_voxels.len() + 1 == t,
            "clip of {t} frames has {} intra, {} forward, {} backward voxel grids",
            self.intra_voxels.len(),
            self.fwd_voxels.len(),
            self.bwd_voxels.len()
        );
        let (h, w) = self.lr_size();
        let bins = self.bins();
        for f in &self.blurry_lr {
            ensure!(f.dim() == (3, h, w), "LR frame shape {:?} != (3, {h}, {w})", f.dim());
        }
        for v in self.intra_voxels.iter().chain(&self.fwd_voxels).chain(&self.bwd_voxels) {
            ensure!(
                v.data.dim() == (bins, h, w),
                "voxel shape {:?} != ({bins}, {h}, {w})",
                v.data.dim()
            );
        }
        Ok(())
    }
}

/// One training clip: network inputs plus HR targets and edge masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub inputs: ClipInputs,
    pub sharp_hr: Vec<Frame>,
    pub edge_masks: Vec<Frame>,
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn scale(&self) -> usize {
        self.inputs.scale
    }

    pub fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        let t = self.len();
        let (h, w) = self.inputs.lr_size();
        let s = self.scale();
        ensure!(
            self.sharp_hr.len() == t && self.edge_masks.len() == t,
            "clip of {t} frames has {} HR targets and {} masks",
            self.sharp_hr.len(),
            self.edge_masks.len()
        );
        for f in self.sharp_hr.iter().chain(&self.edge_masks) {
            ensure!(f.dim() == (3, h * s, w * s), "HR shape {:?} != (3, {}, {})", f.dim(), h * s, w * s);
        }
        for m in &self.edge_masks {
            ensure!(m.iter().all(|v| (0.0..=1.0).contains(v)), "edge mask outside [0, 1]");
        }
        Ok(())
    }
}

/// Voxelize pre-simulated streams into network inputs.
pub fn assemble_inputs(
    blurry_lr: Vec<Frame>,
    lr_events: &EventStream,
    exposures: &[ExposureWindow],
    bins: usize,
    scale: usize,
) -> Result<ClipInputs> {
    ensure!(
        blurry_lr.len() == exposures.len(),
        "{} blurry frames but {} exposures",
        blurry_lr.len(),
        exposures.len()
    );
    let (_, h, w) = blurry_lr
        .first()
        .ok_or_else(|| crate::Error::invalid("no blurry frames"))?
        .dim();
    ensure!(
        (usize::from(lr_events.width()), usize::from(lr_events.height())) == (w, h),
        "event geometry {}x{} does not match LR frames {w}x{h}",
        lr_events.width(),
        lr_events.height()
    );
    let seg = segment_events(lr_events, exposures)?;
    let intra_voxels = seg
        .intra
        .iter()
        .map(|s| voxelize(s.events, s.window, bins, w, h, VoxelKind::Intra))
        .collect::<Result<Vec<_>>>()?;
    let fwd_voxels = seg
        .inter
        .iter()
        .map(|s| voxelize(s.events, s.window, bins, w, h, VoxelKind::InterForward))
        .collect::<Result<Vec<_>>>()?;
    let bwd_voxels = seg
        .inter
        .iter()
        .map(|s| voxelize(s.events, s.window, bins, w, h, VoxelKind::InterBackward))
        .collect::<Result<Vec<_>>>()?;
    let inputs = ClipInputs {
        blurry_lr,
        intra_voxels,
        fwd_voxels,
        bwd_voxels,
        scale,
    };
    inputs.validate()?;
    Ok(inputs)
}

pub fn assemble_edge_masks(
    hr_events: &EventStream,
    exposures: &[ExposureWindow],
    bins: usize,
) -> Result<Vec<Frame>> {
    let (w, h) = (usize::from(hr_events.width()), usize::from(hr_events.height()));
    segment_events(hr_events, exposures)?
        .intra
        .iter()
        .map(|s| hr_edge_mask(s.events, s.window, bins, h, w))
        .collect()
}

/// Everything produced for one clip: the sample plus the raw material needed
/// to write it to disk.
#[derive(Debug, Clone)]
pub struct BuiltClip {
    pub sample: SequenceSample,
    pub lr_events: EventStream,
    pub hr_events: EventStream,
    pub exposures: Vec<ExposureWindow>,
}

/// Build a full sample from a high-frame-rate sharp clip, one pass over the
/// source frames.
pub fn build_clip<S: FrameSource + ?Sized>(source: &S, plan: &ExposurePlan, params: SampleParams) -> Result<BuiltClip> {
    plan.validate()?;
    ensure!(params.scale >= 1 && params.bins >= 1, "scale and bins must be positive");
    let needed = plan.frames_needed();
    ensure!(
        source.len() >= needed,
        "exposure plan needs {needed} sharp frames, source has {}",
        source.len()
    );
    let first = source.frame(0)?;
    let (c, hr_h, hr_w) = first.dim();
    ensure!(c == 3, "sharp frames must be RGB, got {c} channels");
    let s = params.scale;
    ensure!(hr_h % s == 0 && hr_w % s == 0, "HR size {hr_h}x{hr_w} not divisible by {s}");
    let dim16 = |v: usize| u16::try_from(v).map_err(|_| crate::Error::invalid("frame too large"));
    let mut hr_sim = EventSimulator::new(dim16(hr_w)?, dim16(hr_h)?, params.theta)?;
    let mut lr_sim = EventSimulator::new(dim16(hr_w / s)?, dim16(hr_h / s)?, params.theta)?;
    let (mut hr_events, mut lr_events) = (Vec::new(), Vec::new());

    let mut blurry_lr = Vec::with_capacity(plan.len());
    let mut sharp_hr = Vec::with_capacity(plan.len());
    let mut exposures = Vec::with_capacity(plan.len());
    let mut exposure_iter = plan.exposures.iter().enumerate().peekable();
    let mut acc: Option<BlurAccumulator> = None;

    for i in 0..needed {
        let f = if i == 0 { first.clone() } else { source.frame(i)? };
        ensure!(f.dim() == first.dim(), "sharp frame {i} has shape {:?}", f.dim());
        let t = source.timestamp(i);
        let gray = frame::luma(f.view());
        hr_sim.push_frame(gray.view(), t, &mut hr_events)?;
        let mut gray_lr = downsample_plane(gray.view(), s)?;
        gray_lr.mapv_inplace(|v| v.clamp(0.0, 1.0));
        lr_sim.push_frame(gray_lr.view(), t, &mut lr_events)?;

        let Some(&(k, range)) = exposure_iter.peek() else { break };
        if range.contains(&i) {
            acc.get_or_insert_with(BlurAccumulator::new).add(f.view())?;
            if i == ExposurePlan::reference_frame(range) {
                sharp_hr.push(f.clone());
            }
            if i + 1 == range.end {
                let blur = acc.take().expect("accumulator started").finish()?;
                let mut lr = downsample_bicubic(blur.view(), s)?;
                frame::clamp_unit(&mut lr);
                blurry_lr.push(lr);
                exposures.push(ExposureWindow::new(k, source.timestamp(range.start), t)?);
                exposure_iter.next();
            }
        }
    }

    let t0 = source.timestamp(0);
    let t1 = source.timestamp(needed - 1);
    let hr_stream = EventStream::new(hr_events, dim16(hr_w)?, dim16(hr_h)?, t0, t1)?;
    let lr_stream = EventStream::new(lr_events, dim16(hr_w / s)?, dim16(hr_h / s)?, t0, t1)?;

    let inputs = assemble_inputs(blurry_lr, &lr_stream, &exposures, params.bins, s)?;
    let edge_masks = assemble_edge_masks(&hr_stream, &exposures, params.bins)?;
    let sample = SequenceSample {
        inputs,
        sharp_hr,
        edge_masks,
    };
    sample.validate()?;
    Ok(BuiltClip {
        sample,
        lr_events: lr_stream,
        hr_events: hr_stream,
        exposures,
    })
}

pub fn build_sequence_sample<S: FrameSource + ?Sized>(
    source: &S,
    plan: &ExposurePlan,
    params: SampleParams,
) -> Result<SequenceSample> {
    build_clip(source, plan, params).map(|b| b.sample)
}

/// Stack frames into a `T × C × H × W` array.
pub fn stack_frames(frames: &[Frame]) -> Result<ndarray::Array4<f32>> {
    let views: Vec<_> = frames.iter().map(|f| f.view()).collect();
    ndarray::stack(Axis(0), &views).map_err(|e| crate::Error::invalid(format!("stack: {e}")))
}
