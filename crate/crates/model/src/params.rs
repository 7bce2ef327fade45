//! Named trainable tensors and their seeded initialization.

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Const(f64),
    /// Uniform in `[-bound, bound]`.
    Uniform(f64),
}

/// Kaiming-uniform bound for a leaky-ReLU(0.1) network.
pub fn kaiming_bound(fan_in: usize) -> f64 {
    (6.0 / ((1.0 + 0.01) * fan_in as f64)).sqrt()
}

/// Collects parameters while a network is being constructed.
pub struct Builder {
    prefix: Vec<String>,
    entries: Vec<(String, Var)>,
    rng: ChaCha8Rng,
    dtype: DType,
    device: Device,
    trainable: bool,
}

impl Builder {
    pub fn new(seed: u64, dtype: DType) -> Self {
        Builder {
            prefix: Vec::new(),
            entries: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            dtype,
            device: Device::Cpu,
            trainable: true,
        }
    }

    /// Like [`Builder::new`], but the layers hold detached views of the
    /// parameters: forward passes record no autograd graph, while updates
    /// through the store remain visible.
    pub fn frozen(seed: u64, dtype: DType) -> Self {
        Builder {
            trainable: false,
            ..Builder::new(seed, dtype)
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn scoped<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        self.prefix.push(name.to_string());
        let out = f(self);
        self.prefix.pop();
        out
    }

    pub fn param(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Tensor> {
        let mut full = self.prefix.join(".");
        if !full.is_empty() {
            full.push('.');
        }
        full.push_str(name);
        ensure!(
            self.entries.iter().all(|(n, _)| *n != full),
            "duplicate parameter {full}"
        );
        let n: usize = shape.iter().product();
        let values: Vec<f64> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Const(c) => vec![c; n],
            Init::Uniform(b) => (0..n).map(|_| self.rng.random_range(-b..=b)).collect(),
        };
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let handle = if self.trainable {
            var.as_tensor().clone()
        } else {
            var.as_tensor().detach()
        };
        self.entries.push((full, var));
        Ok(handle)
    }

    pub fn finish(self) -> ParamStore {
        ParamStore { entries: self.entries }
    }
}

/// Every trainable tensor of a network, in construction order.
#[derive(Debug)]
pub struct ParamStore {
    entries: Vec<(String, Var)>,
}

impl ParamStore {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn element_count(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// Detached copies of every parameter.
    pub fn snapshot(&self) -> Result<Vec<(String, Tensor)>> {
        self.entries
            .iter()
            .map(|(n, v)| Ok((n.clone(), v.as_tensor().detach().copy()?)))
            .collect()
    }

    /// Overwrite parameters from `(name, tensor)` pairs; every parameter must
    /// be covered exactly once.
    pub fn load(&self, tensors: &[(String, Tensor)]) -> Result<()> {
        ensure!(
            tensors.len() == self.entries.len(),
            "expected {} parameters, got {}",
            self.entries.len(),
            tensors.len()
        );
        for (name, t) in tensors {
            let var = self.get(name).ok_or_else(|| Error::invalid(format!("unknown parameter {name}")))?;
            ensure!(
                var.dims() == t.dims(),
                "parameter {name}: shape {:?} vs {:?}",
                var.dims(),
                t.dims()
            );
            var.set(&t.to_dtype(var.dtype())?.contiguous()?)?;
        }
        Ok(())
    }

    /// Replace every parameter with uniform noise of the given amplitude.
    /// Used to move off the zero-initialized identity point in checks.
    pub fn randomize(&self, seed: u64, amplitude: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, var) in &self.entries {
            let n = var.elem_count();
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
            let t = Tensor::from_vec(values, var.dims(), var.device())?.to_dtype(var.dtype())?;
            var.set(&t)?;
        }
        Ok(())
    }
}
