//! Host-side clip preparation: temporal windows, crops, flips, bicubic skip
//! and conversion into batched tensors.

use candle_core::{DType, Device, Tensor};
use evdvsr_core::events::VoxelGrid;
use evdvsr_core::frame::{self, Frame};
use evdvsr_core::resize::upsample_bicubic;
use evdvsr_core::sample::{ClipInputs, SequenceSample};
use ndarray::{Array3, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::error::{ensure, Result};
use crate::network::NetInput;

/// Network input plus HR targets and loss masks.
#[derive(Debug, Clone)]
pub struct ClipBatch {
    pub input: NetInput,
    /// `(N, T, 3, sH, sW)`.
    pub gt: Tensor,
    /// `(N, T, 3, sH, sW)` edge weights in `[0, 1]`.
    pub mask: Tensor,
}

fn stack3(frames: &[ArrayView3<f32>], device: &Device) -> Result<Tensor> {
    ensure!(!frames.is_empty(), "nothing to stack");
    let (c, h, w) = frames[0].dim();
    let mut data = Vec::with_capacity(frames.len() * c * h * w);
    for f in frames {
        ensure!(f.dim() == (c, h, w), "inconsistent frame shapes {:?} vs {:?}", f.dim(), (c, h, w));
        data.extend(f.iter().copied());
    }
    Ok(Tensor::from_vec(data, (frames.len(), c, h, w), device)?)
}

/// `[N][T]` arrays → `(N, T, C, H, W)`.
fn stack_clips(clips: &[Vec<ArrayView3<f32>>], device: &Device) -> Result<Tensor> {
    let per: Vec<Tensor> = clips.iter().map(|c| stack3(c, device)).collect::<Result<_>>()?;
    Ok(Tensor::stack(&per, 0)?)
}

fn voxel_views(v: &[VoxelGrid]) -> Vec<ArrayView3<'_, f32>> {
    v.iter().map(|g| g.data.view()).collect()
}

pub fn bicubic_frames(frames: &[Frame], scale: usize) -> Result<Vec<Frame>> {
    Ok(frames.iter().map(|f| upsample_bicubic(f.view(), scale)).collect::<evdvsr_core::Result<_>>()?)
}

/// Batched inputs for clips of equal geometry.
pub fn net_input(clips: &[&ClipInputs], device: &Device) -> Result<NetInput> {
    ensure!(!clips.is_empty(), "empty batch");
    let t = clips[0].len();
    for c in clips {
        c.validate()?;
        ensure!(c.len() == t && c.lr_size() == clips[0].lr_size(), "clips in a batch must share length and size");
    }
    let bic: Vec<Vec<Frame>> = clips.iter().map(|c| bicubic_frames(&c.blurry_lr, c.scale)).collect::<Result<_>>()?;
    let frames: Vec<_> = clips.iter().map(|c| c.blurry_lr.iter().map(|f| f.view()).collect()).collect();
    let intra: Vec<_> = clips.iter().map(|c| voxel_views(&c.intra_voxels)).collect();
    let bic_views: Vec<_> = bic.iter().map(|c| c.iter().map(|f| f.view()).collect()).collect();
    let (inter_fwd, inter_bwd) = if t > 1 {
        let f: Vec<_> = clips.iter().map(|c| voxel_views(&c.fwd_voxels)).collect();
        let b: Vec<_> = clips.iter().map(|c| voxel_views(&c.bwd_voxels)).collect();
        (Some(stack_clips(&f, device)?), Some(stack_clips(&b, device)?))
    } else {
        (None, None)
    };
    Ok(NetInput {
        frames: stack_clips(&frames, device)?,
        intra: stack_clips(&intra, device)?,
        inter_fwd,
        inter_bwd,
        bicubic: stack_clips(&bic_views, device)?,
    })
}

pub fn clip_batch(samples: &[SequenceSample], device: &Device) -> Result<ClipBatch> {
    for s in samples {
        s.validate()?;
    }
    let inputs: Vec<&ClipInputs> = samples.iter().map(|s| &s.inputs).collect();
    let gt: Vec<_> = samples.iter().map(|s| s.sharp_hr.iter().map(|f| f.view()).collect()).collect();
    let mask: Vec<_> = samples.iter().map(|s| s.edge_masks.iter().map(|f| f.view()).collect()).collect();
    Ok(ClipBatch {
        input: net_input(&inputs, device)?,
        gt: stack_clips(&gt, device)?,
        mask: stack_clips(&mask, device)?,
    })
}

impl ClipBatch {
    pub fn to_dtype(&self, dtype: DType) -> Result<Self> {
        Ok(ClipBatch {
            input: self.input.to_dtype(dtype)?,
            gt: self.gt.to_dtype(dtype)?,
            mask: self.mask.to_dtype(dtype)?,
        })
    }
}

/// Frames `start..start + len` with the inter voxels between them.
pub fn temporal_window(s: &SequenceSample, start: usize, len: usize) -> Result<SequenceSample> {
    ensure!(len >= 1 && start + len <= s.len(), "window {start}+{len} exceeds clip of {}", s.len());
    let r = start..start + len;
    let ri = start..start + len - 1;
    Ok(SequenceSample {
        inputs: ClipInputs {
            blurry_lr: s.inputs.blurry_lr[r.clone()].to_vec(),
            intra_voxels: s.inputs.intra_voxels[r.clone()].to_vec(),
            fwd_voxels: s.inputs.fwd_voxels[ri.clone()].to_vec(),
            bwd_voxels: s.inputs.bwd_voxels[ri].to_vec(),
            scale: s.inputs.scale,
        },
        sharp_hr: s.sharp_hr[r.clone()].to_vec(),
        edge_masks: s.edge_masks[r].to_vec(),
    })
}

fn map_sample(s: &SequenceSample, lr: impl Fn(&Array3<f32>) -> Result<Array3<f32>>, hr: impl Fn(&Array3<f32>) -> Result<Array3<f32>>) -> Result<SequenceSample> {
    let vox = |v: &[VoxelGrid]| -> Result<Vec<VoxelGrid>> {
        v.iter()
            .map(|g| {
                Ok(VoxelGrid {
                    data: lr(&g.data)?,
                    ..g.clone()
                })
            })
            .collect()
    };
    let frames = |f: &[Frame], op: &dyn Fn(&Array3<f32>) -> Result<Array3<f32>>| -> Result<Vec<Frame>> { f.iter().map(op).collect() };
    Ok(SequenceSample {
        inputs: ClipInputs {
            blurry_lr: frames(&s.inputs.blurry_lr, &lr)?,
            intra_voxels: vox(&s.inputs.intra_voxels)?,
            fwd_voxels: vox(&s.inputs.fwd_voxels)?,
            bwd_voxels: vox(&s.inputs.bwd_voxels)?,
            scale: s.inputs.scale,
        },
        sharp_hr: frames(&s.sharp_hr, &hr)?,
        edge_masks: frames(&s.edge_masks, &hr)?,
    })
}

/// LR crop `size × size` at `(top, left)`; HR tensors use the window scaled by `s`.
pub fn crop(s: &SequenceSample, top: usize, left: usize, size: usize) -> Result<SequenceSample> {
    let k = s.scale();
    map_sample(
        s,
        |a| Ok(frame::crop(a.view(), top, left, size, size)?),
        |a| Ok(frame::crop(a.view(), top * k, left * k, size * k, size * k)?),
    )
}

/// Spatial flips of every tensor; voxel bins and polarities are untouched.
pub fn flip(s: &SequenceSample, horizontal: bool, vertical: bool) -> Result<SequenceSample> {
    let op = |a: &Array3<f32>| -> Result<Array3<f32>> {
        let mut out = a.clone();
        if horizontal {
            out = frame::flip_horizontal(out.view());
        }
        if vertical {
            out = frame::flip_vertical(out.view());
        }
        Ok(out)
    };
    map_sample(s, op, op)
}

/// Random clip, window, crop and flip selection driven by a seekable stream.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(seed: u64) -> Self {
        BatchSampler {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn restore(seed: u64, word_pos: u128) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(word_pos);
        BatchSampler { seed, rng }
    }

    pub fn sample(&mut self, data: &[SequenceSample], cfg: &TrainConfig) -> Result<SequenceSample> {
        ensure!(!data.is_empty(), "empty dataset");
        let clip = &data[self.rng.random_range(0..data.len())];
        let t = cfg.clip_length;
        ensure!(clip.len() >= t, "clip of {} frames is shorter than clip_length {t}", clip.len());
        let start = self.rng.random_range(0..=clip.len() - t);
        let (h, w) = clip.inputs.lr_size();
        let size = cfg.crop_size;
        ensure!(size <= h && size <= w, "crop_size {size} exceeds LR frame {h}×{w}");
        let (top, left) = if cfg.center_crop {
            ((h - size) / 2, (w - size) / 2)
        } else {
            (self.rng.random_range(0..=h - size), self.rng.random_range(0..=w - size))
        };
        let fh = self.rng.random::<f64>() < cfg.flip_prob_h;
        let fv = self.rng.random::<f64>() < cfg.flip_prob_v;
        let s = temporal_window(clip, start, t)?;
        let s = crop(&s, top, left, size)?;
        flip(&s, fh, fv)
    }

    pub fn batch(&mut self, data: &[SequenceSample], cfg: &TrainConfig, device: &Device) -> Result<ClipBatch> {
        let samples: Vec<SequenceSample> = (0..cfg.batch_size).map(|_| self.sample(data, cfg)).collect::<Result<_>>()?;
        clip_batch(&samples, device)
    }
}
