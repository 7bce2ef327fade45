use ndarray::Array2;

use super::flow::{pyramidal_flow, LkParams};
use super::quality::ssim;
use crate::error::{ensure, Result};
use crate::frame::{luma, Frame};

fn check_clips(pred: &[Frame], gt: &[Frame]) -> Result<()> {
    ensure!(pred.len() == gt.len(), "clip lengths differ: {} vs {}", pred.len(), gt.len());
    ensure!(pred.len() >= 2, "temporal metrics need at least 2 frames, got {}", pred.len());
    for (p, g) in pred.iter().zip(gt) {
        ensure!(p.dim() == g.dim(), "frame shapes differ: {:?} vs {:?}", p.dim(), g.dim());
    }
    Ok(())
}

fn luma64(f: &Frame) -> Array2<f64> {
    luma(f.view()).mapv(f64::from)
}

/// Temporal optical-flow error: mean L1 difference between the flow of
/// consecutive predicted frames and the flow of consecutive GT frames, both
/// measured on BT.601 luma with the same classical estimator.
pub fn tof(pred: &[Frame], gt: &[Frame]) -> Result<f64> {
    check_clips(pred, gt)?;
    let params = LkParams::default();
    let pl: Vec<_> = pred.iter().map(luma64).collect();
    let gl: Vec<_> = gt.iter().map(luma64).collect();
    let mut total = 0.0;
    for t in 0..pred.len() - 1 {
        let fp = pyramidal_flow(&pl[t], &pl[t + 1], &params);
        let fg = pyramidal_flow(&gl[t], &gl[t + 1], &params);
        total += fp.mean_l1_distance(&fg);
    }
    Ok(total / (pred.len() - 1) as f64)
}

/// Temporal change consistency: SSIM between the temporal-difference maps of
/// prediction and GT, each shifted from `[-1, 1]` to `[0, 1]`.
pub fn tcc(pred: &[Frame], gt: &[Frame]) -> Result<f64> {
    check_clips(pred, gt)?;
    let diff = |clip: &[Frame], t: usize| {
        let mut d = &clip[t + 1] - &clip[t];
        d.mapv_inplace(|v| (v + 1.0) / 2.0);
        d
    };
    let mut total = 0.0;
    for t in 0..pred.len() - 1 {
        total += ssim(diff(pred, t).view(), diff(gt, t).view())?;
    }
    Ok(total / (pred.len() - 1) as f64)
}
