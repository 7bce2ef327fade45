//! Hybrid deformable alignment: an event-guided branch (EGA) and a
//! flow-guided branch (FGA) condition the offsets and masks of a
//! deformable convolution applied to the previous hidden state.

use candle_core::Tensor;

use crate::dcn::{DeformConv, TAPS};
use crate::error::{ensure, Result};
use crate::layers::Conv2d;
use crate::ops::{lrelu, sigmoid, softmax};
use crate::params::{Builder, Init};
use crate::warp::backward_warp;

/// Event-guided modulation of the previous hidden state.
#[derive(Debug, Clone)]
pub struct Ega {
    voxel_proj: Conv2d,
    hidden_proj: Conv2d,
}

impl Ega {
    pub fn new(b: &mut Builder, name: &str, c: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Ega {
                voxel_proj: Conv2d::zeros(b, "voxel_proj", c, c, 1)?,
                hidden_proj: Conv2d::new(b, "hidden_proj", c, c, 1)?,
            })
        })
    }

    /// Per-pixel channel distribution `(N, C, H, W)`.
    pub fn scores(&self, h_prev: &Tensor, voxel_feat: &Tensor) -> Result<Tensor> {
        let v = self.voxel_proj.forward(voxel_feat)?;
        let hp = self.hidden_proj.forward(h_prev)?;
        softmax(&(v * hp)?, 1)
    }

    /// `h' = h_prev ⊙ (C · scores) + proj(voxel)`.
    pub fn forward(&self, h_prev: &Tensor, voxel_feat: &Tensor) -> Result<Tensor> {
        ensure!(
            h_prev.dims() == voxel_feat.dims(),
            "EGA inputs differ: {:?} vs {:?}",
            h_prev.dims(),
            voxel_feat.dims()
        );
        let c = h_prev.dim(1)? as f64;
        let v = self.voxel_proj.forward(voxel_feat)?;
        let hp = self.hidden_proj.forward(h_prev)?;
        let s = softmax(&(&v * hp)?, 1)?;
        Ok(((h_prev * (s * c)?)? + v)?)
    }
}

#[derive(Debug, Clone)]
pub struct HdaOptions {
    pub use_ega: bool,
    pub use_fga: bool,
    pub offset_clamp: f64,
    /// Test hook: leave the learned offset residual unbounded.
    pub skip_offset_clamp: bool,
}

/// Offsets, masks and result of one alignment, kept for inspection.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub offsets: Tensor,
    pub mask: Tensor,
    pub flow: Tensor,
    pub aligned: Tensor,
}

#[derive(Debug, Clone)]
pub struct Hda {
    ega: Ega,
    cond: Vec<Conv2d>,
    mask_bias: Tensor,
    dcn: DeformConv,
    opts: HdaOptions,
}

impl Hda {
    pub fn new(b: &mut Builder, name: &str, c: usize, groups: usize, mask_bias: f64, opts: HdaOptions) -> Result<Self> {
        let pool = c * (2 + usize::from(opts.use_ega) + usize::from(opts.use_fga)) + 2;
        let heads = groups * TAPS * 3;
        b.scoped(name, |b| {
            Ok(Hda {
                ega: Ega::new(b, "ega", c)?,
                cond: vec![
                    Conv2d::new(b, "cond0", pool, c, 3)?,
                    Conv2d::new(b, "cond1", c, c, 3)?,
                    Conv2d::zeros(b, "cond2", c, heads, 3)?,
                ],
                mask_bias: b.param("mask_bias", &[1, groups * TAPS, 1, 1], Init::Const(mask_bias))?,
                dcn: DeformConv::new(b, "dcn", c, c, groups)?,
                opts,
            })
        })
    }

    pub fn ega(&self) -> &Ega {
        &self.ega
    }

    pub fn dcn(&self) -> &DeformConv {
        &self.dcn
    }

    pub fn options(&self) -> &HdaOptions {
        &self.opts
    }

    pub fn set_skip_offset_clamp(&mut self, skip: bool) {
        self.opts.skip_offset_clamp = skip;
    }

    /// Align `h_prev` to the current frame. `flow` maps current-frame
    /// coordinates into the previous frame.
    pub fn align(
        &self,
        h_prev: &Tensor,
        voxel_feat: &Tensor,
        flow: &Tensor,
        fe: &Tensor,
        fi: &Tensor,
    ) -> Result<Alignment> {
        let (n, c, h, w) = h_prev.dims4()?;
        for (what, t) in [("voxel feature", voxel_feat), ("event feature", fe), ("frame feature", fi)] {
            ensure!(t.dims() == [n, c, h, w], "{what} shape {:?} vs hidden {:?}", t.dims(), h_prev.dims());
        }
        ensure!(flow.dims() == [n, 2, h, w], "flow shape {:?} vs hidden {:?}", flow.dims(), h_prev.dims());
        let flow = if self.opts.use_fga { flow.clone() } else { flow.zeros_like()? };
        let mut pool = Vec::with_capacity(5);
        if self.opts.use_ega {
            pool.push(self.ega.forward(h_prev, voxel_feat)?);
        }
        if self.opts.use_fga {
            pool.push(backward_warp(h_prev, &flow)?);
        }
        pool.push(fe.clone());
        pool.push(fi.clone());
        pool.push(flow.clone());
        let mut x = Tensor::cat(&pool, 1)?;
        for (i, conv) in self.cond.iter().enumerate() {
            x = conv.forward(&x)?;
            if i + 1 < self.cond.len() {
                x = lrelu(&x)?;
            }
        }
        let g = self.dcn.groups();
        let residual = x.narrow(1, 0, 2 * g * TAPS)?;
        let residual = if self.opts.skip_offset_clamp {
            residual
        } else {
            residual.clamp(-self.opts.offset_clamp, self.opts.offset_clamp)?
        };
        let residual = residual.reshape((n, g, TAPS, 2, h, w))?;
        let offsets = residual.broadcast_add(&flow.reshape((n, 1, 1, 2, h, w))?)?;
        let logits = x.narrow(1, 2 * g * TAPS, g * TAPS)?.broadcast_add(&self.mask_bias)?;
        let mask = sigmoid(&logits)?.reshape((n, g, TAPS, h, w))?;
        let aligned = self.dcn.forward(h_prev, &offsets, &mask)?;
        Ok(Alignment {
            offsets,
            mask,
            flow,
            aligned,
        })
    }

    pub fn forward(&self, h_prev: &Tensor, voxel_feat: &Tensor, flow: &Tensor, fe: &Tensor, fi: &Tensor) -> Result<Tensor> {
        Ok(self.align(h_prev, voxel_feat, flow, fe, fi)?.aligned)
    }
}
