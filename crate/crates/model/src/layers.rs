use candle_core::Tensor;

use crate::error::{ensure, Result};
use crate::ops::lrelu;
use crate::params::{kaiming_bound, Builder, Init};

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Tensor,
    padding: usize,
}

impl Conv2d {
    pub fn new(b: &mut Builder, name: &str, cin: usize, cout: usize, k: usize) -> Result<Self> {
        Self::with_init(b, name, cin, cout, k, Init::Uniform(kaiming_bound(cin * k * k)))
    }

    pub fn zeros(b: &mut Builder, name: &str, cin: usize, cout: usize, k: usize) -> Result<Self> {
        Self::with_init(b, name, cin, cout, k, Init::Zeros)
    }

    pub fn with_init(b: &mut Builder, name: &str, cin: usize, cout: usize, k: usize, init: Init) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Conv2d {
                weight: b.param("weight", &[cout, cin, k, k], init)?,
                bias: b.param("bias", &[cout], Init::Zeros)?,
                padding: k / 2,
            })
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let cout = self.bias.dim(0)?;
        let y = x.conv2d(&self.weight, self.padding, 1, 1, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, cout, 1, 1))?)?)
    }
}

/// Per-pixel layer normalization over the channel axis of `(N, C, H, W)`.
#[derive(Debug, Clone)]
pub struct ChannelNorm {
    gamma: Tensor,
    beta: Tensor,
}

impl ChannelNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(b: &mut Builder, name: &str, c: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(ChannelNorm {
                gamma: b.param("weight", &[1, c, 1, 1], Init::Const(1.0))?,
                beta: b.param("bias", &[1, c, 1, 1], Init::Zeros)?,
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mu = x.mean_keepdim(1)?;
        let centered = x.broadcast_sub(&mu)?;
        let var = centered.sqr()?.mean_keepdim(1)?;
        let normed = centered.broadcast_div(&(var + Self::EPS)?.sqrt()?)?;
        Ok(normed.broadcast_mul(&self.gamma)?.broadcast_add(&self.beta)?)
    }
}

#[derive(Debug, Clone)]
pub struct ResidualBlock {
    conv1: Conv2d,
    conv2: Conv2d,
}

impl ResidualBlock {
    pub fn new(b: &mut Builder, name: &str, c: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(ResidualBlock {
                conv1: Conv2d::new(b, "conv1", c, c, 3)?,
                // small residual branch at init
                conv2: Conv2d::with_init(b, "conv2", c, c, 3, Init::Uniform(0.1 * kaiming_bound(c * 9)))?,
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let r = self.conv2.forward(&self.conv1.forward(x)?.relu()?)?;
        Ok((x + r)?)
    }
}

/// Stem convolution plus a stack of residual blocks.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    stem: Conv2d,
    blocks: Vec<ResidualBlock>,
}

impl FeatureExtractor {
    pub fn new(b: &mut Builder, name: &str, cin: usize, c: usize, blocks: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(FeatureExtractor {
                stem: Conv2d::new(b, "stem", cin, c, 3)?,
                blocks: (0..blocks)
                    .map(|i| ResidualBlock::new(b, &format!("block{i}"), c))
                    .collect::<Result<_>>()?,
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let cin = self.stem.in_channels();
        ensure!(
            x.rank() == 4 && x.dim(1)? == cin,
            "extractor expects {cin} input channels, got shape {:?}",
            x.dims()
        );
        let mut h = lrelu(&self.stem.forward(x)?)?;
        for blk in &self.blocks {
            h = blk.forward(&h)?;
        }
        Ok(h)
    }
}
