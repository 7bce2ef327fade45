use candle_core::Tensor;

use crate::error::{ensure, Result};
use crate::layers::Conv2d;
use crate::ops::{lrelu, pixel_shuffle2};
use crate::params::Builder;

/// Learned ×s reconstruction residual; the caller adds the bicubic skip.
#[derive(Debug, Clone)]
pub struct Upsampler {
    stages: Vec<Conv2d>,
    conv_hr: Conv2d,
    conv_last: Conv2d,
}

impl Upsampler {
    pub fn new(b: &mut Builder, name: &str, c: usize, scale: usize) -> Result<Self> {
        ensure!(matches!(scale, 2 | 4), "unsupported scale {scale}");
        let n = scale.trailing_zeros() as usize;
        b.scoped(name, |b| {
            Ok(Upsampler {
                stages: (0..n)
                    .map(|i| Conv2d::new(b, &format!("up{i}"), c, 4 * c, 3))
                    .collect::<Result<_>>()?,
                conv_hr: Conv2d::new(b, "conv_hr", c, c, 3)?,
                conv_last: Conv2d::zeros(b, "conv_last", c, 3, 3)?,
            })
        })
    }

    pub fn scale(&self) -> usize {
        1 << self.stages.len()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for s in &self.stages {
            h = lrelu(&pixel_shuffle2(&s.forward(&h)?)?)?;
        }
        self.conv_last.forward(&lrelu(&self.conv_hr.forward(&h)?)?)
    }
}
