//! Differentiable building blocks composed from basic tensor operations.

use candle_core::{DType, Tensor, D};

use crate::error::Result;

pub const LRELU_SLOPE: f64 = 0.1;

pub fn lrelu(x: &Tensor) -> Result<Tensor> {
    let pos = x.relu()?;
    Ok(((pos * (1.0 - LRELU_SLOPE))? + (x * LRELU_SLOPE)?)?)
}

/// `σ(x) = (1 + tanh(x/2)) / 2`; saturates to exactly 1 for large `x`
/// without overflowing in the backward pass.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(((x * 0.5)?.tanh()? + 1.0)?.affine(0.5, 0.0)?)
}

pub fn softmax(x: &Tensor, dim: usize) -> Result<Tensor> {
    let m = x.max_keepdim(dim)?.detach();
    let e = x.broadcast_sub(&m)?.exp()?;
    Ok(e.broadcast_div(&e.sum_keepdim(dim)?)?)
}

pub fn softmax_last(x: &Tensor) -> Result<Tensor> {
    let last = x.rank() - 1;
    softmax(x, last)
}

/// Scale along the last axis to unit L2 norm.
pub fn l2_normalize_last(x: &Tensor) -> Result<Tensor> {
    let n = (x.sqr()?.sum_keepdim(D::Minus1)? + 1e-12)?.sqrt()?;
    Ok(x.broadcast_div(&n)?)
}

/// `(N, 4C, H, W) -> (N, C, 2H, 2W)`.
pub fn pixel_shuffle2(x: &Tensor) -> Result<Tensor> {
    let (n, c4, h, w) = x.dims4()?;
    let c = c4 / 4;
    Ok(x
        .reshape((n, c, 2, 2, h, w))?
        .permute((0, 1, 4, 2, 5, 3))?
        .reshape((n, c, 2 * h, 2 * w))?)
}

/// Bilinear sampling of `src` `(B, C, H·W)` at pixel coordinates `x`, `y`
/// `(B, 1, P)`, returning `(B, C, P)`.
///
/// With `zero_pad` the image is surrounded by zeros; otherwise coordinates
/// are clamped to the border. Corner indices are computed on detached
/// values, so gradients flow through the interpolation weights only.
pub fn bilinear_sample(src: &Tensor, x: &Tensor, y: &Tensor, h: usize, w: usize, zero_pad: bool) -> Result<Tensor> {
    let (b, c, hw) = src.dims3()?;
    debug_assert_eq!(hw, h * w);
    let p = x.dim(2)?;
    let (wf, hf) = ((w - 1) as f64, (h - 1) as f64);
    let (x, y) = if zero_pad {
        (x.clamp(-1.0, w as f64)?, y.clamp(-1.0, h as f64)?)
    } else {
        (x.clamp(0.0, wf)?, y.clamp(0.0, hf)?)
    };
    let x0 = x.detach().floor()?;
    let y0 = y.detach().floor()?;
    let fx = (&x - &x0)?;
    let fy = (&y - &y0)?;
    let gx = (fx.ones_like()? - &fx)?;
    let gy = (fy.ones_like()? - &fy)?;
    let x1 = (&x0 + 1.0)?;
    let y1 = (&y0 + 1.0)?;
    let corners = [
        (&x0, &y0, (&gx * &gy)?),
        (&x1, &y0, (&fx * &gy)?),
        (&x0, &y1, (&gx * &fy)?),
        (&x1, &y1, (&fx * &fy)?),
    ];
    let mut acc: Option<Tensor> = None;
    for (cx, cy, weight) in corners {
        let weight = if zero_pad {
            let inside = cx
                .ge(0.0)?
                .mul(&cx.le(wf)?)?
                .mul(&cy.ge(0.0)?)?
                .mul(&cy.le(hf)?)?
                .to_dtype(weight.dtype())?;
            (weight * inside)?
        } else {
            weight
        };
        let xi = cx.clamp(0.0, wf)?;
        let yi = cy.clamp(0.0, hf)?;
        let idx = ((yi * w as f64)? + xi)?
            .to_dtype(DType::U32)?
            .broadcast_as((b, c, p))?
            .contiguous()?;
        let term = src.gather(&idx, 2)?.broadcast_mul(&weight)?;
        acc = Some(match acc {
            None => term,
            Some(a) => (a + term)?,
        });
    }
    Ok(acc.expect("four corners"))
}
