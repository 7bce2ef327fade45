//! Modulated deformable 3×3 convolution with grouped offsets, built from
//! a gathered deformable im2col and one matrix product.

use candle_core::Tensor;

use crate::error::{ensure, Result};
use crate::ops::bilinear_sample;
use crate::params::{kaiming_bound, Builder, Init};
use crate::warp::base_grid;

pub const TAPS: usize = 9;

#[derive(Debug, Clone)]
pub struct DeformConv {
    pub weight: Tensor,
    pub bias: Tensor,
    groups: usize,
}

impl DeformConv {
    pub fn new(b: &mut Builder, name: &str, cin: usize, cout: usize, groups: usize) -> Result<Self> {
        ensure!(cin % groups == 0, "{cin} channels not divisible by {groups} groups");
        b.scoped(name, |b| {
            Ok(DeformConv {
                weight: b.param("weight", &[cout, cin, 3, 3], Init::Uniform(kaiming_bound(cin * TAPS)))?,
                bias: b.param("bias", &[cout], Init::Zeros)?,
                groups,
            })
        })
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// `x` `(N, C, H, W)`; `offsets` `(N, G, 9, 2, H, W)` as `(dx, dy)` per
    /// tap in row-major kernel order; `mask` `(N, G, 9, H, W)`. Samples
    /// outside the image read zero.
    pub fn forward(&self, x: &Tensor, offsets: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        let g = self.groups;
        ensure!(
            offsets.dims() == [n, g, TAPS, 2, h, w] && mask.dims() == [n, g, TAPS, h, w],
            "offset/mask shapes {:?} / {:?} do not match input {:?} with {g} groups",
            offsets.dims(),
            mask.dims(),
            x.dims()
        );
        let hw = h * w;
        let (gx, gy) = base_grid(h, w, x.dtype(), x.device())?;
        let taps: Vec<f64> = (0..TAPS).map(|k| (k % 3) as f64 - 1.0).collect();
        let rows: Vec<f64> = (0..TAPS).map(|k| (k / 3) as f64 - 1.0).collect();
        let kx = Tensor::from_vec(taps, (1, TAPS, 1), x.device())?.to_dtype(x.dtype())?;
        let ky = Tensor::from_vec(rows, (1, TAPS, 1), x.device())?.to_dtype(x.dtype())?;
        let gx = gx.reshape((1, 1, hw))?;
        let gy = gy.reshape((1, 1, hw))?;
        let off = offsets.reshape((n * g, TAPS, 2, hw))?;
        let px = off.narrow(2, 0, 1)?.squeeze(2)?.broadcast_add(&gx)?.broadcast_add(&kx)?;
        let py = off.narrow(2, 1, 1)?.squeeze(2)?.broadcast_add(&gy)?.broadcast_add(&ky)?;
        let px = px.reshape((n * g, 1, TAPS * hw))?;
        let py = py.reshape((n * g, 1, TAPS * hw))?;
        let cg = c / g;
        let src = x.reshape((n * g, cg, hw))?;
        let sampled = bilinear_sample(&src, &px, &py, h, w, true)?; // (N·G, cg, 9·HW)
        let m = mask.reshape((n * g, 1, TAPS * hw))?;
        let cols = sampled.broadcast_mul(&m)?.reshape((n, c * TAPS, hw))?;
        let cout = self.weight.dim(0)?;
        let wmat = self.weight.reshape((1, cout, c * TAPS))?.broadcast_as((n, cout, c * TAPS))?.contiguous()?;
        let out = wmat.matmul(&cols)?.reshape((n, cout, h, w))?;
        Ok(out.broadcast_add(&self.bias.reshape((1, cout, 1, 1))?)?)
    }
}
