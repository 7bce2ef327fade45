use ndarray::{Array2, ArrayView2, ArrayView3, Axis};

use crate::error::{ensure, Result};

/// PSNR of identical images is reported at this cap instead of infinity.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psnr {
    pub db: f64,
    /// The error was zero (or below the cap's resolution) and `db` is the cap.
    pub saturated: bool,
}

fn same_shape(a: ArrayView3<f32>, b: ArrayView3<f32>) -> Result<()> {
    ensure!(a.dim() == b.dim(), "shape mismatch {:?} vs {:?}", a.dim(), b.dim());
    ensure!(a.len() > 0, "empty image");
    Ok(())
}

pub fn mse(pred: ArrayView3<f32>, gt: ArrayView3<f32>) -> Result<f64> {
    same_shape(pred, gt)?;
    let sum: f64 = pred
        .iter()
        .zip(gt.iter())
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// `10·log10(1/MSE)` over all RGB samples, peak value 1.
pub fn psnr(pred: ArrayView3<f32>, gt: ArrayView3<f32>) -> Result<Psnr> {
    let m = mse(pred, gt)?;
    let db = if m > 0.0 { -10.0 * m.log10() } else { f64::INFINITY };
    Ok(if db >= PSNR_CAP_DB {
        Psnr {
            db: PSNR_CAP_DB,
            saturated: true,
        }
    } else {
        Psnr { db, saturated: false }
    })
}

pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable 'valid' filtering.
fn filter_valid(plane: &Array2<f64>, k: &[f64]) -> Array2<f64> {
    let (h, w) = plane.dim();
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = Array2::<f64>::zeros((oh, w));
    for y in 0..oh {
        for x in 0..w {
            rows[[y, x]] = (0..n).map(|i| k[i] * plane[[y + i, x]]).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((oh, ow));
    for y in 0..oh {
        for x in 0..ow {
            out[[y, x]] = (0..n).map(|i| k[i] * rows[[y, x + i]]).sum();
        }
    }
    out
}

/// Mean SSIM of one plane (values nominally in `[0, 1]`).
pub fn ssim_plane(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    ensure!(a.dim() == b.dim(), "shape mismatch {:?} vs {:?}", a.dim(), b.dim());
    let (h, w) = a.dim();
    ensure!(
        h >= SSIM_WINDOW && w >= SSIM_WINDOW,
        "image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
    );
    let k = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let (a, b) = (a.to_owned(), b.to_owned());
    let mu_a = filter_valid(&a, &k);
    let mu_b = filter_valid(&b, &k);
    let aa = filter_valid(&(&a * &a), &k);
    let bb = filter_valid(&(&b * &b), &k);
    let ab = filter_valid(&(&a * &b), &k);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a.as_slice().unwrap()[i], mu_b.as_slice().unwrap()[i]);
        let va = aa.as_slice().unwrap()[i] - ma * ma;
        let vb = bb.as_slice().unwrap()[i] - mb * mb;
        let cov = ab.as_slice().unwrap()[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(total / mu_a.len() as f64)
}

/// Single-scale SSIM (11×11 Gaussian, σ = 1.5), averaged over channels.
pub fn ssim(pred: ArrayView3<f32>, gt: ArrayView3<f32>) -> Result<f64> {
    same_shape(pred, gt)?;
    let mut total = 0.0;
    for (p, g) in pred.axis_iter(Axis(0)).zip(gt.axis_iter(Axis(0))) {
        total += ssim_plane(p.mapv(f64::from).view(), g.mapv(f64::from).view())?;
    }
    Ok(total / pred.dim().0 as f64)
}
