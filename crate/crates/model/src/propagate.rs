//! One backward sweep followed by one forward sweep; the forward sweep also
//! consumes the backward sweep's per-frame output.

use candle_core::Tensor;

use crate::align::{Hda, HdaOptions};
use crate::error::{ensure, Result};
use crate::layers::Conv2d;
use crate::ops::lrelu;
use crate::params::Builder;

/// `fi + conv2(lrelu(conv1([inputs…, fi])))`, zero residual at init.
#[derive(Debug, Clone)]
pub struct Fusion {
    conv1: Conv2d,
    conv2: Conv2d,
}

impl Fusion {
    pub fn new(b: &mut Builder, name: &str, inputs: usize, c: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Fusion {
                conv1: Conv2d::new(b, "conv1", inputs * c, c, 3)?,
                conv2: Conv2d::zeros(b, "conv2", c, c, 3)?,
            })
        })
    }

    pub fn forward(&self, fi: &Tensor, extra: &[&Tensor]) -> Result<Tensor> {
        let mut parts: Vec<&Tensor> = extra.to_vec();
        parts.push(fi);
        let x = Tensor::cat(&parts, 1)?;
        let r = self.conv2.forward(&lrelu(&self.conv1.forward(&x)?)?)?;
        Ok((fi + r)?)
    }
}

/// Per-frame inputs of the propagation stage; all `(N, C, H, W)` except
/// flows `(N, 2, H, W)`. Inter quantities have `T - 1` entries: entry `k`
/// belongs to the gap between frames `k` and `k + 1`.
pub struct PropagationInput<'a> {
    pub fi: &'a [Tensor],
    pub fe: &'a [Tensor],
    pub voxel_fwd: &'a [Tensor],
    pub voxel_bwd: &'a [Tensor],
    /// Flow from frame `k + 1` into frame `k`.
    pub flow_fwd: &'a [Tensor],
    /// Flow from frame `k` into frame `k + 1`.
    pub flow_bwd: &'a [Tensor],
}

#[derive(Debug, Clone)]
pub struct PropagationTrace {
    pub backward: Vec<Tensor>,
    pub forward_aligned: Vec<Tensor>,
    pub output: Vec<Tensor>,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub hda_bwd: Hda,
    pub hda_fwd: Hda,
    fuse_bwd: Fusion,
    fuse_fwd: Fusion,
}

impl Propagation {
    pub fn new(b: &mut Builder, name: &str, c: usize, groups: usize, mask_bias: f64, opts: HdaOptions) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Propagation {
                hda_bwd: Hda::new(b, "hda_bwd", c, groups, mask_bias, opts.clone())?,
                hda_fwd: Hda::new(b, "hda_fwd", c, groups, mask_bias, opts.clone())?,
                fuse_bwd: Fusion::new(b, "fuse_bwd", 2, c)?,
                fuse_fwd: Fusion::new(b, "fuse_fwd", 3, c)?,
            })
        })
    }

    pub fn set_skip_offset_clamp(&mut self, skip: bool) {
        self.hda_bwd.set_skip_offset_clamp(skip);
        self.hda_fwd.set_skip_offset_clamp(skip);
    }

    pub fn forward(&self, inp: &PropagationInput) -> Result<PropagationTrace> {
        let t_len = inp.fi.len();
        ensure!(t_len >= 1, "empty sequence");
        ensure!(inp.fe.len() == t_len, "{} frame features but {} event features", t_len, inp.fe.len());
        for (what, n) in [
            ("forward voxels", inp.voxel_fwd.len()),
            ("backward voxels", inp.voxel_bwd.len()),
            ("forward flows", inp.flow_fwd.len()),
            ("backward flows", inp.flow_bwd.len()),
        ] {
            ensure!(n + 1 == t_len, "{what}: expected {} entries, got {n}", t_len - 1);
        }
        let zeros = inp.fi[0].zeros_like()?;

        let mut backward: Vec<Option<Tensor>> = vec![None; t_len];
        for t in (0..t_len).rev() {
            let aligned = match backward.get(t + 1).and_then(|h| h.as_ref()) {
                Some(h_prev) => self.hda_bwd.forward(
                    h_prev,
                    &inp.voxel_bwd[t],
                    &inp.flow_bwd[t],
                    &inp.fe[t],
                    &inp.fi[t],
                )?,
                None => zeros.clone(),
            };
            backward[t] = Some(self.fuse_bwd.forward(&inp.fi[t], &[&aligned])?);
        }
        let backward: Vec<Tensor> = backward.into_iter().map(|b| b.expect("filled")).collect();

        let mut output: Vec<Tensor> = Vec::with_capacity(t_len);
        let mut forward_aligned = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let aligned = match output.last() {
                Some(h_prev) => self.hda_fwd.forward(
                    h_prev,
                    &inp.voxel_fwd[t - 1],
                    &inp.flow_fwd[t - 1],
                    &inp.fe[t],
                    &inp.fi[t],
                )?,
                None => zeros.clone(),
            };
            output.push(self.fuse_fwd.forward(&inp.fi[t], &[&aligned, &backward[t]])?);
            forward_aligned.push(aligned);
        }
        Ok(PropagationTrace {
            backward,
            forward_aligned,
            output,
        })
    }
}
