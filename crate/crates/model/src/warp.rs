use candle_core::{DType, Device, Tensor};

use crate::error::{ensure, Result};
use crate::ops::bilinear_sample;

/// Pixel-center coordinate grids `(1, 1, H·W)` for x and y.
pub fn base_grid(h: usize, w: usize, dtype: DType, device: &Device) -> Result<(Tensor, Tensor)> {
    let xs: Vec<f64> = (0..h * w).map(|i| (i % w) as f64).collect();
    let ys: Vec<f64> = (0..h * w).map(|i| (i / w) as f64).collect();
    let gx = Tensor::from_vec(xs, (1, 1, h * w), device)?.to_dtype(dtype)?;
    let gy = Tensor::from_vec(ys, (1, 1, h * w), device)?.to_dtype(dtype)?;
    Ok((gx, gy))
}

/// Sample `feature` `(N, C, H, W)` at `(x + dx, y + dy)` for a flow
/// `(N, 2, H, W)` holding `(dx, dy)`; out-of-range coordinates are clamped to
/// the border.
pub fn backward_warp(feature: &Tensor, flow: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = feature.dims4()?;
    ensure!(
        flow.dims() == [n, 2, h, w],
        "flow shape {:?} does not match feature {:?}",
        flow.dims(),
        feature.dims()
    );
    let (gx, gy) = base_grid(h, w, feature.dtype(), feature.device())?;
    let flow = flow.reshape((n, 2, h * w))?;
    let x = flow.narrow(1, 0, 1)?.broadcast_add(&gx)?;
    let y = flow.narrow(1, 1, 1)?.broadcast_add(&gy)?;
    let src = feature.reshape((n, c, h * w))?;
    Ok(bilinear_sample(&src, &x, &y, h, w, false)?.reshape((n, c, h, w))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_identity() {
        let f = Tensor::randn(0f32, 1.0, (2, 3, 5, 4), &Device::Cpu).unwrap();
        let flow = Tensor::zeros((2, 2, 5, 4), DType::F32, &Device::Cpu).unwrap();
        let out = backward_warp(&f, &flow).unwrap();
        let a = f.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let b = out.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn unit_flow_shifts_with_border_replication() {
        let f = Tensor::arange(0f32, 12.0, &Device::Cpu).unwrap().reshape((1, 1, 3, 4)).unwrap();
        let mut fl = vec![0f32; 24];
        fl[..12].fill(1.0);
        let flow = Tensor::from_vec(fl, (1, 2, 3, 4), &Device::Cpu).unwrap();
        let out = backward_warp(&f, &flow).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(&out[..4], &[1.0, 2.0, 3.0, 3.0]);
        assert_eq!(&out[8..], &[9.0, 10.0, 11.0, 11.0]);
    }

    #[test]
    fn rejects_mismatched_flow() {
        let f = Tensor::zeros((1, 2, 4, 4), DType::F32, &Device::Cpu).unwrap();
        let flow = Tensor::zeros((1, 2, 4, 5), DType::F32, &Device::Cpu).unwrap();
        assert!(backward_warp(&f, &flow).is_err());
    }
}
