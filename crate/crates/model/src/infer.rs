//! Whole-clip restoration, optionally over overlapping spatial tiles.

use candle_core::{DType, Device, Tensor};
use evdvsr_core::frame::Frame;
use evdvsr_core::sample::ClipInputs;
use ndarray::Array3;

use crate::batch::net_input;
use crate::error::{ensure, Result};
use crate::network::{EvDeblurVsr, NetInput};

/// `(T, C, H, W)` tensor → host frames.
pub fn to_frames(x: &Tensor) -> Result<Vec<Frame>> {
    let (t, c, h, w) = x.dims4()?;
    let data = x.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
    let n = c * h * w;
    (0..t)
        .map(|i| Ok(Array3::from_shape_vec((c, h, w), data[i * n..(i + 1) * n].to_vec()).expect("sized")))
        .collect()
}

/// Tile origins covering `len` with windows of `tile` and at least
/// `overlap` shared pixels between neighbours.
pub fn tile_starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if tile >= len {
        return vec![0];
    }
    let stride = tile.saturating_sub(overlap).max(1);
    let mut starts: Vec<usize> = (0..).map(|i| i * stride).take_while(|&s| s + tile < len).collect();
    starts.push(len - tile);
    starts
}

/// Blend weight along one axis: linear ramps of `ramp` pixels on sides that
/// touch a neighbouring tile, flat elsewhere.
fn ramp_weights(len: usize, ramp: usize, lead: bool, trail: bool) -> Vec<f64> {
    (0..len)
        .map(|p| {
            let mut w: f64 = 1.0;
            if ramp > 0 {
                if lead {
                    w = w.min((p as f64 + 0.5) / ramp as f64);
                }
                if trail {
                    w = w.min(((len - p) as f64 - 0.5) / ramp as f64);
                }
            }
            w
        })
        .collect()
}

fn narrow_input(x: &NetInput, top: usize, left: usize, th: usize, tw: usize, s: usize) -> Result<NetInput> {
    let lr = |t: &Tensor| -> Result<Tensor> { Ok(t.narrow(3, top, th)?.narrow(4, left, tw)?) };
    Ok(NetInput {
        frames: lr(&x.frames)?,
        intra: lr(&x.intra)?,
        inter_fwd: x.inter_fwd.as_ref().map(lr).transpose()?,
        inter_bwd: x.inter_bwd.as_ref().map(lr).transpose()?,
        bicubic: x.bicubic.narrow(3, top * s, th * s)?.narrow(4, left * s, tw * s)?,
    })
}

/// Residual over the full frame, assembled from overlapping tiles whose
/// contributions are blended with linear ramps across each overlap.
pub fn tiled_residual(net: &EvDeblurVsr, x: &NetInput, tile: usize, overlap: usize) -> Result<Tensor> {
    let (h, w) = x.lr_size()?;
    let s = net.config().scale;
    ensure!(tile % 4 == 0 && tile > 0, "tile size {tile} must be a positive multiple of 4");
    let (th, tw) = (tile.min(h), tile.min(w));
    let ys = tile_starts(h, th, overlap);
    let xs = tile_starts(w, tw, overlap);
    let (n, t) = (x.batch()?, x.len()?);
    let mut acc = Tensor::zeros((n, t, 3, h * s, w * s), DType::F64, &Device::Cpu)?;
    let mut wsum = Tensor::zeros((1, 1, 1, h * s, w * s), DType::F64, &Device::Cpu)?;
    for (iy, &top) in ys.iter().enumerate() {
        for (ix, &left) in xs.iter().enumerate() {
            let part = net.forward_residual(&narrow_input(x, top, left, th, tw, s)?)?.to_dtype(DType::F64)?;
            let wy = ramp_weights(th * s, overlap * s, iy > 0, iy + 1 < ys.len());
            let wx = ramp_weights(tw * s, overlap * s, ix > 0, ix + 1 < xs.len());
            let wy = Tensor::from_vec(wy, (1, 1, 1, th * s, 1), &Device::Cpu)?;
            let wx = Tensor::from_vec(wx, (1, 1, 1, 1, tw * s), &Device::Cpu)?;
            let wt = wy.broadcast_mul(&wx)?;
            let ranges = [0..n, 0..t, 0..3, top * s..(top + th) * s, left * s..(left + tw) * s];
            let cur = acc.narrow(3, top * s, th * s)?.narrow(4, left * s, tw * s)?;
            acc = acc.slice_assign(&ranges, &(cur + part.broadcast_mul(&wt)?)?)?;
            let wr = [0..1, 0..1, 0..1, top * s..(top + th) * s, left * s..(left + tw) * s];
            let cw = wsum.narrow(3, top * s, th * s)?.narrow(4, left * s, tw * s)?;
            wsum = wsum.slice_assign(&wr, &(cw + wt)?)?;
        }
    }
    Ok(acc.broadcast_div(&wsum)?.to_dtype(x.frames.dtype())?)
}

/// Restored HR frames for one clip, clamped to `[0, 1]`. `tile = 0`
/// processes the whole frame at once.
pub fn restore(net: &EvDeblurVsr, clip: &ClipInputs, tile: usize, overlap: usize) -> Result<Vec<Frame>> {
    ensure!(clip.bins() == net.config().bins, "clip has {} voxel bins, model expects {}", clip.bins(), net.config().bins);
    ensure!(clip.scale == net.config().scale, "clip scale {} but model scale {}", clip.scale, net.config().scale);
    let x = net_input(&[clip], &Device::Cpu)?;
    let residual = if tile == 0 {
        net.forward_residual(&x)?
    } else {
        tiled_residual(net, &x, tile, overlap)?
    };
    let out = (residual + &x.bicubic)?.clamp(0f32, 1f32)?;
    to_frames(&out.squeeze(0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_cover_with_overlap() {
        assert_eq!(tile_starts(64, 64, 16), vec![0]);
        assert_eq!(tile_starts(64, 32, 16), vec![0, 16, 32]);
        let s = tile_starts(100, 32, 16);
        assert_eq!(*s.last().unwrap() + 32, 100);
        for p in s.windows(2) {
            assert!(p[1] - p[0] <= 16);
        }
    }

    #[test]
    fn ramps_are_positive_and_flat_at_borders() {
        let w = ramp_weights(32, 8, false, false);
        assert!(w.iter().all(|&v| v == 1.0));
        let w = ramp_weights(32, 8, true, true);
        assert!(w.iter().all(|&v| v > 0.0 && v <= 1.0));
        assert!(w[0] < w[4] && w[31] < w[27]);
    }
}
