//! Adam with bias correction and a cosine-annealed learning rate.

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};

use crate::error::{ensure, Result};
use crate::params::ParamStore;

/// `lr_min + (base - lr_min)·(1 + cos(π·i/total))/2`, held at `lr_min`
/// past the end.
pub fn cosine_lr(iter: u64, total: u64, base: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return base;
    }
    let p = (iter.min(total) as f64) / total as f64;
    lr_min + (base - lr_min) * (1.0 + (std::f64::consts::PI * p).cos()) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

/// Moment buffers, one pair per parameter in store order.
#[derive(Debug)]
pub struct Adam {
    pub params: AdamParams,
    pub step: u64,
    pub m: Vec<Var>,
    pub v: Vec<Var>,
}

impl Adam {
    pub fn new(store: &ParamStore, params: AdamParams) -> Result<Self> {
        let zeros = |p: &Var| -> Result<Var> { Ok(Var::from_tensor(&p.as_tensor().zeros_like()?)?) };
        Ok(Adam {
            params,
            step: 0,
            m: store.iter().map(|(_, p)| zeros(p)).collect::<Result<_>>()?,
            v: store.iter().map(|(_, p)| zeros(p)).collect::<Result<_>>()?,
        })
    }

    /// One update at learning rate `lr`. Parameters without a gradient are
    /// treated as having a zero gradient, so every moment decays uniformly.
    pub fn step(&mut self, store: &ParamStore, grads: &GradStore, lr: f64) -> Result<()> {
        ensure!(self.m.len() == store.len(), "optimizer state does not match the parameter store");
        self.step += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (i, (_, p)) in store.iter().enumerate() {
            let g = match grads.get(p.as_tensor()) {
                Some(g) => g.clone(),
                None => p.as_tensor().zeros_like()?,
            };
            let m = ((self.m[i].as_tensor() * beta1)? + (&g * (1.0 - beta1))?)?;
            let v = ((self.v[i].as_tensor() * beta2)? + (g.sqr()? * (1.0 - beta2))?)?;
            if lr != 0.0 {
                let m_hat = (&m / c1)?;
                let v_hat = (&v / c2)?;
                let delta = (m_hat / (v_hat.sqrt()? + eps)?)?;
                let next: Tensor = (p.as_tensor() - (delta * lr)?)?;
                p.set(&next)?;
            }
            self.m[i].set(&m)?;
            self.v[i].set(&v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        let (base, lo) = (1e-4, 1e-7);
        assert_eq!(cosine_lr(0, 100, base, lo), base);
        assert!((cosine_lr(100, 100, base, lo) - lo).abs() < 1e-20);
        let mid = lo + (base - lo) * (1.0 + (std::f64::consts::FRAC_PI_2).cos()) / 2.0;
        assert!((cosine_lr(50, 100, base, lo) - mid).abs() < 1e-18);
        assert!((cosine_lr(500, 100, base, lo) - lo).abs() < 1e-20);
    }

    #[test]
    fn schedule_is_monotone() {
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let lr = cosine_lr(i, 200, 1e-3, 1e-7);
            assert!(lr <= prev);
            prev = lr;
        }
    }
}
