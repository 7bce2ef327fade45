//! Reconstruction (MSE) and edge-weighted Charbonnier losses.

use candle_core::Tensor;

use crate::error::{ensure, Result};

pub const DEFAULT_ETA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_r: f64,
    pub l_e: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.l_r.is_finite() && self.l_e.is_finite() && self.total.is_finite()
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    ensure!(a.dims() == b.dims(), "{what}: shape {:?} vs {:?}", a.dims(), b.dims());
    Ok(())
}

/// Mean squared error over every element.
pub fn loss_r(pred: &Tensor, gt: &Tensor) -> Result<Tensor> {
    same_shape(pred, gt, "loss_r")?;
    Ok((pred - gt)?.sqr()?.mean_all()?)
}

/// `mean_t mean_{c,y,x} mask · sqrt((gt - pred)² + η²)` for `(N, T, C, H, W)`
/// clips; `mask` is `(N, T, 1, H, W)` or full shape. Every frame carries the
/// same number of elements, so the nested mean is a flat mean.
pub fn loss_e(pred: &Tensor, gt: &Tensor, mask: &Tensor, eta: f64) -> Result<Tensor> {
    same_shape(pred, gt, "loss_e")?;
    ensure!(
        mask.rank() == pred.rank() && mask.dims().iter().zip(pred.dims()).enumerate().all(|(i, (&m, &p))| m == p || (i == 2 && m == 1)),
        "loss_e: mask {:?} does not broadcast to {:?}",
        mask.dims(),
        pred.dims()
    );
    let lo = mask.min_all()?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
    let hi = mask.max_all()?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
    ensure!(lo >= 0.0 && hi <= 1.0, "loss_e: mask values must lie in [0, 1], found [{lo}, {hi}]");
    let d = (gt - pred)?;
    let pen = (d.sqr()? + eta * eta)?.sqrt()?;
    Ok(pen.broadcast_mul(mask)?.mean_all()?)
}

/// Training objective according to the loss toggles; returns the scalar
/// graph node and the detached values.
pub fn objective(
    pred: &Tensor,
    gt: &Tensor,
    mask: &Tensor,
    eta: f64,
    use_lr: bool,
    use_le: bool,
) -> Result<(Tensor, LossBreakdown)> {
    ensure!(use_lr || use_le, "at least one loss term must be enabled");
    let lr = loss_r(pred, gt)?;
    let le = loss_e(pred, gt, mask, eta)?;
    let scalar = |t: &Tensor| -> Result<f64> { Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?) };
    let (vr, ve) = (scalar(&lr)?, scalar(&le)?);
    let total = match (use_lr, use_le) {
        (true, true) => (lr + le)?,
        (true, false) => lr,
        _ => le,
    };
    let vt = scalar(&total)?;
    Ok((
        total,
        LossBreakdown {
            l_r: if use_lr { vr } else { 0.0 },
            l_e: if use_le { ve } else { 0.0 },
            total: vt,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};

    fn t(v: &[f32], shape: &[usize]) -> Tensor {
        Tensor::from_slice(v, shape, &Device::Cpu).unwrap()
    }

    fn val(x: Tensor) -> f64 {
        x.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
    }

    #[test]
    fn mse_of_constant_offset() {
        let gt = Tensor::rand(0f32, 1f32, (1, 2, 3, 4, 4), &Device::Cpu).unwrap();
        let pred = (&gt + 0.1).unwrap();
        assert!((val(loss_r(&pred, &gt).unwrap()) - 0.01).abs() < 1e-7);
        assert_eq!(val(loss_r(&gt, &gt).unwrap()), 0.0);
    }

    #[test]
    fn single_pixel_charbonnier() {
        let pred = t(&[0.3], &[1, 1, 1, 1, 1]);
        let gt = t(&[0.0], &[1, 1, 1, 1, 1]);
        let m = t(&[1.0], &[1, 1, 1, 1, 1]);
        assert!((val(loss_e(&pred, &gt, &m, DEFAULT_ETA).unwrap()) - 0.3).abs() < 1e-7);
    }

    #[test]
    fn zero_mask_gives_zero() {
        let pred = Tensor::rand(0f32, 1f32, (1, 2, 3, 4, 4), &Device::Cpu).unwrap();
        let gt = Tensor::rand(0f32, 1f32, (1, 2, 3, 4, 4), &Device::Cpu).unwrap();
        let m = Tensor::zeros((1, 2, 1, 4, 4), DType::F32, &Device::Cpu).unwrap();
        assert_eq!(val(loss_e(&pred, &gt, &m, DEFAULT_ETA).unwrap()), 0.0);
    }

    #[test]
    fn rejects_out_of_range_mask_and_bad_shapes() {
        let a = Tensor::zeros((1, 1, 3, 2, 2), DType::F32, &Device::Cpu).unwrap();
        let m = (Tensor::ones((1, 1, 1, 2, 2), DType::F32, &Device::Cpu).unwrap() * 1.5).unwrap();
        assert!(loss_e(&a, &a, &m, DEFAULT_ETA).is_err());
        let b = Tensor::zeros((1, 1, 3, 2, 3), DType::F32, &Device::Cpu).unwrap();
        assert!(loss_r(&a, &b).is_err());
    }

    #[test]
    fn objective_respects_toggles() {
        let pred = Tensor::rand(0f32, 1f32, (1, 2, 3, 4, 4), &Device::Cpu).unwrap();
        let gt = Tensor::rand(0f32, 1f32, (1, 2, 3, 4, 4), &Device::Cpu).unwrap();
        let m = Tensor::rand(0f32, 1f32, (1, 2, 1, 4, 4), &Device::Cpu).unwrap();
        let (_, both) = objective(&pred, &gt, &m, DEFAULT_ETA, true, true).unwrap();
        assert!((both.total - (both.l_r + both.l_e)).abs() < 1e-6);
        assert!(both.total >= both.l_r.max(both.l_e));
        let (_, only_r) = objective(&pred, &gt, &m, DEFAULT_ETA, true, false).unwrap();
        assert_eq!(only_r.l_e, 0.0);
        assert!(objective(&pred, &gt, &m, DEFAULT_ETA, false, false).is_err());
    }
}
