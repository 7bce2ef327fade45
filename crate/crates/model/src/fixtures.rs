//! Procedurally generated miniature models and clips for checks and tests.

use candle_core::{DType, Device, Tensor};
use evdvsr_core::events::{TimeWindow, VoxelGrid, VoxelKind};
use evdvsr_core::sample::{ClipInputs, SequenceSample};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::Result;

/// A model small enough for exhaustive checks on a single core.
pub fn miniature_config() -> ModelConfig {
    ModelConfig {
        channels: 8,
        residual_blocks: 1,
        heads: 2,
        bins: 3,
        scale: 2,
        dcn_groups: 2,
        ..ModelConfig::default()
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize, usize), lo: f32, hi: f32) -> Array3<f32> {
    Array3::from_shape_fn(shape, |_| rng.random_range(lo..hi))
}

/// Random frames, voxels, targets and masks with consistent geometry.
pub fn random_sample(t: usize, h: usize, w: usize, bins: usize, scale: usize, seed: u64) -> SequenceSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = TimeWindow::new(0.0, 1.0).expect("valid window");
    let vox = |kind: VoxelKind, rng: &mut ChaCha8Rng| VoxelGrid {
        data: uniform(rng, (bins, h, w), -1.0, 1.0),
        kind,
        window,
    };
    let blurry_lr = (0..t).map(|_| uniform(&mut rng, (3, h, w), 0.0, 1.0)).collect();
    let intra_voxels = (0..t).map(|_| vox(VoxelKind::Intra, &mut rng)).collect();
    let fwd_voxels = (1..t).map(|_| vox(VoxelKind::InterForward, &mut rng)).collect();
    let bwd_voxels = (1..t).map(|_| vox(VoxelKind::InterBackward, &mut rng)).collect();
    let sharp_hr = (0..t).map(|_| uniform(&mut rng, (3, h * scale, w * scale), 0.0, 1.0)).collect();
    let edge_masks = (0..t).map(|_| uniform(&mut rng, (3, h * scale, w * scale), 0.0, 1.0)).collect();
    SequenceSample {
        inputs: ClipInputs {
            blurry_lr,
            intra_voxels,
            fwd_voxels,
            bwd_voxels,
            scale,
        },
        sharp_hr,
        edge_masks,
    }
}

pub fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64, dtype: DType) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Ok(Tensor::from_vec(v, shape, &Device::Cpu)?.to_dtype(dtype)?)
}
