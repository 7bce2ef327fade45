//! Full model: feature extraction, reciprocal fusion, bidirectional
//! alignment-propagation and reconstruction on top of a bicubic skip.

use candle_core::{DType, Tensor};

use crate::align::HdaOptions;
use crate::attention::Rfd;
use crate::config::ModelConfig;
use crate::error::{ensure, Result};
use crate::flow::FlowNet;
use crate::layers::FeatureExtractor;
use crate::params::{Builder, ParamStore};
use crate::propagate::{Propagation, PropagationInput, PropagationTrace};
use crate::upsample::Upsampler;

/// Batched network input. `inter_*` are `None` for single-frame clips.
#[derive(Debug, Clone)]
pub struct NetInput {
    /// `(N, T, 3, H, W)` blurry LR frames.
    pub frames: Tensor,
    /// `(N, T, B, H, W)` intra-frame voxels.
    pub intra: Tensor,
    /// `(N, T-1, B, H, W)` forward inter-frame voxels.
    pub inter_fwd: Option<Tensor>,
    /// `(N, T-1, B, H, W)` backward inter-frame voxels.
    pub inter_bwd: Option<Tensor>,
    /// `(N, T, 3, sH, sW)` bicubic upsampling of `frames`.
    pub bicubic: Tensor,
}

impl NetInput {
    pub fn batch(&self) -> Result<usize> {
        Ok(self.frames.dim(0)?)
    }

    pub fn len(&self) -> Result<usize> {
        Ok(self.frames.dim(1)?)
    }

    pub fn lr_size(&self) -> Result<(usize, usize)> {
        Ok((self.frames.dim(3)?, self.frames.dim(4)?))
    }

    pub fn to_dtype(&self, dtype: DType) -> Result<Self> {
        let cast = |t: &Tensor| t.to_dtype(dtype);
        Ok(NetInput {
            frames: cast(&self.frames)?,
            intra: cast(&self.intra)?,
            inter_fwd: self.inter_fwd.as_ref().map(cast).transpose()?,
            inter_bwd: self.inter_bwd.as_ref().map(cast).transpose()?,
            bicubic: cast(&self.bicubic)?,
        })
    }
}

/// Intermediate per-frame quantities of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub fi: Vec<Tensor>,
    pub fe: Vec<Tensor>,
    pub propagation: PropagationTrace,
    /// `(N, T, 3, sH, sW)` learned residual.
    pub residual: Tensor,
}

#[derive(Debug, Clone)]
pub struct EvDeblurVsr {
    cfg: ModelConfig,
    frame_ext: FeatureExtractor,
    intra_ext: FeatureExtractor,
    inter_ext: FeatureExtractor,
    rfd: Rfd,
    flow: FlowNet,
    pub propagation: Propagation,
    up: Upsampler,
}

/// `(N, T, …)` → T tensors of `(N, …)`.
fn split_time(x: &Tensor, n: usize, t: usize) -> Result<Vec<Tensor>> {
    let mut dims = x.dims().to_vec();
    ensure!(dims[0] == n * t, "cannot split {:?} into {n}×{t}", dims);
    dims[0] = t;
    dims.insert(0, n);
    let x = x.reshape(dims)?;
    (0..t).map(|i| Ok(x.narrow(1, i, 1)?.squeeze(1)?)).collect()
}

/// `(N, T, …)` → `(N·T, …)`.
fn fold_time(x: &Tensor) -> Result<Tensor> {
    let mut dims = x.dims().to_vec();
    let nt = dims[0] * dims[1];
    dims.remove(0);
    dims[0] = nt;
    Ok(x.reshape(dims)?)
}

impl EvDeblurVsr {
    pub fn new(cfg: &ModelConfig, seed: u64, dtype: DType) -> Result<(Self, ParamStore)> {
        Self::build(cfg, Builder::new(seed, dtype))
    }

    /// Inference-only network: identical outputs, no gradient bookkeeping.
    pub fn new_frozen(cfg: &ModelConfig, seed: u64, dtype: DType) -> Result<(Self, ParamStore)> {
        Self::build(cfg, Builder::frozen(seed, dtype))
    }

    fn build(cfg: &ModelConfig, mut b: Builder) -> Result<(Self, ParamStore)> {
        cfg.validate()?;
        let c = cfg.channels;
        let opts = HdaOptions {
            use_ega: cfg.use_ega,
            use_fga: cfg.use_fga,
            offset_clamp: cfg.dcn_offset_clamp,
            skip_offset_clamp: false,
        };
        let net = EvDeblurVsr {
            cfg: cfg.clone(),
            frame_ext: FeatureExtractor::new(&mut b, "frame_ext", 3, c, cfg.residual_blocks)?,
            intra_ext: FeatureExtractor::new(&mut b, "intra_ext", cfg.bins, c, cfg.residual_blocks)?,
            inter_ext: FeatureExtractor::new(&mut b, "inter_ext", cfg.bins, c, cfg.residual_blocks)?,
            rfd: Rfd::new(&mut b, "rfd", c, cfg.heads, cfg.rfd_order)?,
            flow: FlowNet::new(&mut b, "flow")?,
            propagation: Propagation::new(&mut b, "prop", c, cfg.dcn_groups, cfg.dcn_mask_bias, opts)?,
            up: Upsampler::new(&mut b, "up", c, cfg.scale)?,
        };
        Ok((net, b.finish()))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn flow_net(&self) -> &FlowNet {
        &self.flow
    }

    pub fn set_skip_offset_clamp(&mut self, skip: bool) {
        self.propagation.set_skip_offset_clamp(skip);
    }

    fn check(&self, x: &NetInput) -> Result<(usize, usize, usize, usize)> {
        ensure!(x.frames.rank() == 5 && x.frames.dim(2)? == 3, "frames must be (N, T, 3, H, W), got {:?}", x.frames.dims());
        let (n, t, _, h, w) = x.frames.dims5()?;
        ensure!(t >= 1, "empty clip");
        ensure!(h % 4 == 0 && w % 4 == 0, "LR size {h}×{w} must be divisible by 4");
        let bins = self.cfg.bins;
        ensure!(x.intra.dims() == [n, t, bins, h, w], "intra voxels {:?} do not match ({n}, {t}, {bins}, {h}, {w})", x.intra.dims());
        for (what, v) in [("forward", &x.inter_fwd), ("backward", &x.inter_bwd)] {
            match v {
                Some(v) => ensure!(
                    v.dims() == [n, t - 1, bins, h, w],
                    "{what} voxels {:?} do not match ({n}, {}, {bins}, {h}, {w})",
                    v.dims(),
                    t - 1
                ),
                None => ensure!(t == 1, "{what} voxels missing for a {t}-frame clip"),
            }
        }
        let s = self.cfg.scale;
        ensure!(
            x.bicubic.dims() == [n, t, 3, s * h, s * w],
            "bicubic skip {:?} does not match ({n}, {t}, 3, {}, {})",
            x.bicubic.dims(),
            s * h,
            s * w
        );
        Ok((n, t, h, w))
    }

    pub fn trace(&self, x: &NetInput) -> Result<ForwardTrace> {
        let (n, t, h, w) = self.check(x)?;
        let s = self.cfg.scale;
        let frames = fold_time(&x.frames)?;
        let mut intra = fold_time(&x.intra)?;
        if !self.cfg.use_intra {
            intra = intra.zeros_like()?;
        }
        let f_img = self.frame_ext.forward(&frames)?;
        let f_evt = self.intra_ext.forward(&intra)?;
        let (fi, fe) = self.rfd.forward(&f_img, &f_evt)?;
        let fi = split_time(&fi, n, t)?;
        let fe = split_time(&fe, n, t)?;

        let (mut vf, mut vb, mut flow_f, mut flow_b) = (vec![], vec![], vec![], vec![]);
        if t > 1 {
            let m = t - 1;
            let fwd = fold_time(x.inter_fwd.as_ref().expect("checked"))?;
            let bwd = fold_time(x.inter_bwd.as_ref().expect("checked"))?;
            let mut vox = Tensor::cat(&[&fwd, &bwd], 0)?;
            if !self.cfg.use_inter {
                vox = vox.zeros_like()?;
            }
            let feats = self.inter_ext.forward(&vox)?;
            vf = split_time(&feats.narrow(0, 0, n * m)?, n, m)?;
            vb = split_time(&feats.narrow(0, n * m, n * m)?, n, m)?;

            let later = fold_time(&x.frames.narrow(1, 1, m)?)?;
            let earlier = fold_time(&x.frames.narrow(1, 0, m)?)?;
            let cur = Tensor::cat(&[&later, &earlier], 0)?;
            let reference = Tensor::cat(&[&earlier, &later], 0)?;
            let flows = self.flow.forward(&cur, &reference)?;
            flow_f = split_time(&flows.narrow(0, 0, n * m)?, n, m)?;
            flow_b = split_time(&flows.narrow(0, n * m, n * m)?, n, m)?;
        }
        let propagation = self.propagation.forward(&PropagationInput {
            fi: &fi,
            fe: &fe,
            voxel_fwd: &vf,
            voxel_bwd: &vb,
            flow_fwd: &flow_f,
            flow_bwd: &flow_b,
        })?;
        let feats = Tensor::stack(&propagation.output, 1)?;
        let residual = self
            .up
            .forward(&fold_time(&feats)?)?
            .reshape((n, t, 3, s * h, s * w))?;
        Ok(ForwardTrace {
            fi,
            fe,
            propagation,
            residual,
        })
    }

    pub fn forward_residual(&self, x: &NetInput) -> Result<Tensor> {
        Ok(self.trace(x)?.residual)
    }

    /// `(N, T, 3, sH, sW)` restored HR frames.
    pub fn forward(&self, x: &NetInput) -> Result<Tensor> {
        Ok((self.forward_residual(x)? + &x.bicubic)?)
    }
}
