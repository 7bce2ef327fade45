//! Central finite-difference verification of analytic gradients.

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Pass when `|a - n| <= tol · max(|a|, |n|, floor)`.
    pub tol: f64,
    pub floor: f64,
    /// Entries probed per tensor; `None` probes every entry.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-6,
            tol: 1e-3,
            floor: 1e-6,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    /// Largest `|a - n| / max(|a|, |n|, floor)` seen.
    pub worst_ratio: f64,
    pub worst: String,
}

impl GradCheckReport {
    fn new() -> Self {
        GradCheckReport {
            checked: 0,
            failures: 0,
            worst_ratio: 0.0,
            worst: String::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }

    fn record(&mut self, label: String, analytic: f64, numeric: f64, o: &GradCheckOptions) {
        let scale = analytic.abs().max(numeric.abs()).max(o.floor);
        let ratio = (analytic - numeric).abs() / scale;
        self.checked += 1;
        if !(ratio <= o.tol) {
            self.failures += 1;
        }
        if !(ratio <= self.worst_ratio) {
            self.worst_ratio = ratio;
            self.worst = format!("{label}: analytic {analytic:.6e}, numeric {numeric:.6e}");
        }
    }
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Check `d loss / d var` for every var; `loss` must read the vars' current
/// values each call and return a scalar.
pub fn check_vars(vars: &[(String, Var)], loss: impl Fn() -> Result<Tensor>, o: &GradCheckOptions) -> Result<GradCheckReport> {
    let l = loss()?;
    ensure!(l.rank() == 0, "loss must be a scalar, got shape {:?}", l.dims());
    let grads = l.backward()?;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut report = GradCheckReport::new();
    for (name, var) in vars {
        let base = var.as_tensor().detach().copy()?;
        let shape = base.dims().to_vec();
        let dtype = base.dtype();
        let values = base.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
        let analytic = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?,
            None => vec![0.0; values.len()],
        };
        let picks: Vec<usize> = match o.max_entries {
            Some(k) if k < values.len() => (0..k).map(|_| rng.random_range(0..values.len())).collect(),
            _ => (0..values.len()).collect(),
        };
        for i in picks {
            let probe = |delta: f64| -> Result<f64> {
                let mut v = values.clone();
                v[i] += delta;
                var.set(&Tensor::from_vec(v, shape.as_slice(), &Device::Cpu)?.to_dtype(dtype)?)?;
                scalar(&loss()?)
            };
            let numeric = (probe(o.eps)? - probe(-o.eps)?) / (2.0 * o.eps);
            var.set(&base)?;
            report.record(format!("{name}[{i}]"), analytic[i], numeric, o);
        }
    }
    Ok(report)
}

/// Gradient check of a tensor function; the scalar objective is a fixed
/// random projection `Σ f(x) ⊙ R`, so every output element contributes.
pub fn check_fn(
    inputs: &[(&str, Tensor)],
    f: impl Fn(&[Tensor]) -> Result<Tensor>,
    o: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let vars: Vec<(String, Var)> = inputs
        .iter()
        .map(|(n, t)| Ok((n.to_string(), Var::from_tensor(&t.to_dtype(DType::F64)?)?)))
        .collect::<Result<_>>()?;
    let probe = {
        let xs: Vec<Tensor> = vars.iter().map(|(_, v)| v.as_tensor().clone()).collect();
        let out = f(&xs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0x5eed);
        let r: Vec<f64> = (0..out.elem_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(r, out.dims(), &Device::Cpu)?
    };
    check_vars(
        &vars,
        || {
            let xs: Vec<Tensor> = vars.iter().map(|(_, v)| v.as_tensor().clone()).collect();
            Ok((f(&xs)?.to_dtype(DType::F64)? * &probe)?.sum_all()?)
        },
        o,
    )
}

/// Directional derivative along a random unit direction over all vars,
/// compared against the analytic `⟨∇L, d⟩`.
pub fn check_direction(vars: &[(String, Var)], loss: impl Fn() -> Result<Tensor>, o: &GradCheckOptions) -> Result<(f64, f64)> {
    let grads = loss()?.backward()?;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0xd1);
    let dirs: Vec<Tensor> = vars
        .iter()
        .map(|(_, v)| {
            let n = v.elem_count();
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            Ok(Tensor::from_vec(d, v.dims(), &Device::Cpu)?)
        })
        .collect::<Result<_>>()?;
    let norm: f64 = dirs.iter().map(|d| scalar(&d.sqr()?.sum_all()?)).sum::<Result<f64>>()?.sqrt();
    let mut analytic = 0.0;
    for ((_, v), d) in vars.iter().zip(&dirs) {
        if let Some(g) = grads.get(v.as_tensor()) {
            analytic += scalar(&(g.to_dtype(DType::F64)? * d)?.sum_all()?)? / norm;
        }
    }
    let bases: Vec<Tensor> = vars.iter().map(|(_, v)| Ok(v.as_tensor().detach().copy()?)).collect::<Result<_>>()?;
    let shift = |delta: f64| -> Result<f64> {
        for (((_, v), d), b) in vars.iter().zip(&dirs).zip(&bases) {
            v.set(&(b.to_dtype(DType::F64)? + (d * (delta / norm))?)?.to_dtype(b.dtype())?)?;
        }
        scalar(&loss()?)
    };
    let numeric = (shift(o.eps)? - shift(-o.eps)?) / (2.0 * o.eps);
    for ((_, v), b) in vars.iter().zip(&bases) {
        v.set(b)?;
    }
    Ok((analytic, numeric))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_correct_and_wrong_gradients() {
        let x = Tensor::new(&[0.3f64, -1.2, 2.0], &Device::Cpu).unwrap();
        let ok = check_fn(&[("x", x.clone())], |xs| Ok(xs[0].sqr()?.exp()?), &GradCheckOptions::default()).unwrap();
        assert!(ok.passed(), "{ok:?}");
        // detach hides part of the dependency, so analytic and numeric disagree
        let bad = check_fn(&[("x", x)], |xs| Ok((xs[0].sqr()? * xs[0].detach())?), &GradCheckOptions::default()).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn directional_derivative_matches_for_quadratic() {
        let v = Var::from_tensor(&Tensor::new(&[1.0f64, 2.0, -0.5], &Device::Cpu).unwrap()).unwrap();
        let vars = vec![("v".to_string(), v.clone())];
        let (a, n) = check_direction(&vars, || Ok(v.as_tensor().sqr()?.sum_all()?), &GradCheckOptions::default()).unwrap();
        assert!((a - n).abs() < 1e-6 * a.abs().max(1.0));
    }
}
