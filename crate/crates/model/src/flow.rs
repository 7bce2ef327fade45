//! Compact coarse-to-fine flow estimator: three pyramid levels, each
//! predicting a residual on top of the upsampled coarser flow.

use candle_core::Tensor;

use crate::error::{ensure, Result};
use crate::layers::Conv2d;
use crate::ops::lrelu;
use crate::params::Builder;
use crate::warp::backward_warp;

pub const FLOW_LEVELS: usize = 3;

#[derive(Debug, Clone)]
struct LevelNet {
    convs: Vec<Conv2d>,
}

impl LevelNet {
    fn new(b: &mut Builder, name: &str) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(LevelNet {
                convs: vec![
                    Conv2d::new(b, "conv0", 8, 32, 3)?,
                    Conv2d::new(b, "conv1", 32, 32, 3)?,
                    Conv2d::new(b, "conv2", 32, 16, 3)?,
                    Conv2d::zeros(b, "conv3", 16, 2, 3)?,
                ],
            })
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (i, c) in self.convs.iter().enumerate() {
            h = c.forward(&h)?;
            if i + 1 < self.convs.len() {
                h = lrelu(&h)?;
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Clone)]
pub struct FlowNet {
    levels: Vec<LevelNet>,
}

impl FlowNet {
    pub fn new(b: &mut Builder, name: &str) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(FlowNet {
                levels: (0..FLOW_LEVELS)
                    .map(|i| LevelNet::new(b, &format!("level{i}")))
                    .collect::<Result<_>>()?,
            })
        })
    }

    /// Flow `(N, 2, H, W)` mapping coordinates of `frame` into `reference`,
    /// so that `backward_warp(reference, flow) ≈ frame`.
    pub fn forward(&self, frame: &Tensor, reference: &Tensor) -> Result<Tensor> {
        ensure!(
            frame.dims() == reference.dims(),
            "flow inputs differ: {:?} vs {:?}",
            frame.dims(),
            reference.dims()
        );
        let (n, _, h, w) = frame.dims4()?;
        let div = 1 << (FLOW_LEVELS - 1);
        ensure!(h % div == 0 && w % div == 0, "flow input {h}x{w} not divisible by {div}");
        let mut pf = vec![frame.clone()];
        let mut pr = vec![reference.clone()];
        for _ in 1..FLOW_LEVELS {
            let f = pf.last().expect("non-empty").avg_pool2d(2)?;
            let r = pr.last().expect("non-empty").avg_pool2d(2)?;
            pf.push(f);
            pr.push(r);
        }
        let (ch, cw) = (h / div, w / div);
        let mut flow = Tensor::zeros((n, 2, ch, cw), frame.dtype(), frame.device())?;
        for level in (0..FLOW_LEVELS).rev() {
            let (lh, lw) = (pf[level].dim(2)?, pf[level].dim(3)?);
            if flow.dim(2)? != lh {
                flow = (flow.upsample_nearest2d(lh, lw)? * 2.0)?;
            }
            let warped = backward_warp(&pr[level], &flow)?;
            let x = Tensor::cat(&[&pf[level], &warped, &flow], 1)?;
            flow = (&flow + self.levels[level].forward(&x)?)?;
        }
        Ok(flow)
    }
}
