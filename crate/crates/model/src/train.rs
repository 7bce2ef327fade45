//! Optimization loop: sampling, loss, Adam updates, logs, validation and
//! checkpoints.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use candle_core::{DType, Device};
use evdvsr_core::metrics::psnr;
use evdvsr_core::sample::SequenceSample;

use crate::batch::{clip_batch, BatchSampler, ClipBatch};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{ensure, Error, Result};
use crate::loss::{objective, LossBreakdown};
use crate::network::EvDeblurVsr;
use crate::optim::{cosine_lr, Adam, AdamParams};
use crate::params::ParamStore;

pub const LOG_HEADER: &str = "iter, lr, L_r, L_e, L_total, wall_ms";
pub const VAL_HEADER: &str = "iter, psnr, bicubic_psnr";

/// Stream offset separating the sampler from the weight initializer.
const SAMPLER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iter: u64,
    pub lr: f64,
    pub loss: LossBreakdown,
    pub wall_ms: u64,
}

impl LogRow {
    pub fn render(&self) -> String {
        format!(
            "{}, {:.9e}, {:.9e}, {:.9e}, {:.9e}, {}",
            self.iter, self.lr, self.loss.l_r, self.loss.l_e, self.loss.total, self.wall_ms
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        ensure!(f.len() == 6, "expected 6 fields, got {}", f.len());
        let num = |i: usize| -> Result<f64> { f[i].parse().map_err(|_| Error::invalid(format!("bad number {:?}", f[i]))) };
        let int = |i: usize| -> Result<u64> { f[i].parse().map_err(|_| Error::invalid(format!("bad integer {:?}", f[i]))) };
        Ok(LogRow {
            iter: int(0)?,
            lr: num(1)?,
            loss: LossBreakdown {
                l_r: num(2)?,
                l_e: num(3)?,
                total: num(4)?,
            },
            wall_ms: int(5)?,
        })
    }
}

pub fn checkpoint_name(iteration: u64) -> String {
    format!("ckpt_{iteration:08}.ckpt")
}

pub struct Trainer {
    pub cfg: RunConfig,
    pub net: EvDeblurVsr,
    pub store: ParamStore,
    pub adam: Adam,
    pub sampler: BatchSampler,
    /// Completed optimizer steps.
    pub iteration: u64,
    device: Device,
}

impl Trainer {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let (net, store) = EvDeblurVsr::new(&cfg.model, cfg.train.seed, DType::F32)?;
        let adam = Adam::new(&store, adam_params(cfg))?;
        Ok(Trainer {
            cfg: cfg.clone(),
            net,
            store,
            adam,
            sampler: BatchSampler::new(cfg.train.seed ^ SAMPLER_STREAM),
            iteration: 0,
            device: Device::Cpu,
        })
    }

    /// Restore a run. `cfg` may change training-only settings; the model
    /// section must match the checkpoint.
    pub fn resume(ck: &Checkpoint, cfg: &RunConfig) -> Result<Self> {
        ck.verify_model(&cfg.model)?;
        let mut t = Trainer::new(cfg)?;
        t.store.load(&ck.group("param"))?;
        let m = ck.group("adam_m");
        let v = ck.group("adam_v");
        ensure!(m.len() == t.store.len() && v.len() == t.store.len(), "checkpoint optimizer state is incomplete");
        for (i, (name, _)) in t.store.iter().enumerate() {
            let find = |g: &[(String, candle_core::Tensor)]| {
                g.iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, x)| x.clone())
                    .ok_or_else(|| Error::Checkpoint(format!("missing optimizer state for {name}")))
            };
            t.adam.m[i].set(&find(&m)?)?;
            t.adam.v[i].set(&find(&v)?)?;
        }
        t.adam.step = ck.adam_step;
        t.sampler = BatchSampler::restore(ck.rng_seed, ck.rng_word_pos);
        t.iteration = ck.iteration;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut tensors = Vec::with_capacity(3 * self.store.len());
        for (name, t) in self.store.snapshot()? {
            tensors.push((format!("param/{name}"), t));
        }
        for (i, (name, _)) in self.store.iter().enumerate() {
            tensors.push((format!("adam_m/{name}"), self.adam.m[i].as_tensor().copy()?));
            tensors.push((format!("adam_v/{name}"), self.adam.v[i].as_tensor().copy()?));
        }
        Ok(Checkpoint {
            config: self.cfg.clone(),
            iteration: self.iteration,
            rng_seed: self.sampler.seed(),
            rng_word_pos: self.sampler.word_pos(),
            adam_step: self.adam.step,
            tensors,
        })
    }

    /// Learning rate of the next step.
    pub fn lr(&self) -> f64 {
        let t = &self.cfg.train;
        cosine_lr(self.iteration, t.total_iters, t.base_lr, t.lr_min)
    }

    /// One optimization step on `batch`; returns the losses before the update.
    pub fn train_step(&mut self, batch: &ClipBatch) -> Result<LossBreakdown> {
        let t = &self.cfg.train;
        let pred = self.net.forward(&batch.input)?;
        let (total, losses) = objective(&pred, &batch.gt, &batch.mask, t.eta, t.use_lr, t.use_le)?;
        if !losses.is_finite() {
            return Err(Error::Divergence {
                iteration: self.iteration,
                detail: format!("non-finite loss (L_r = {}, L_e = {})", losses.l_r, losses.l_e),
            });
        }
        let grads = total.backward()?;
        let lr = self.lr();
        self.adam.step(&self.store, &grads, lr)?;
        self.iteration += 1;
        Ok(losses)
    }

    /// Sample a batch and take one step.
    pub fn step(&mut self, data: &[SequenceSample]) -> Result<LogRow> {
        let start = Instant::now();
        let lr = self.lr();
        let batch = self.sampler.batch(data, &self.cfg.train, &self.device)?;
        let loss = self.train_step(&batch)?;
        let wall_ms = if self.cfg.train.log_wall_clock {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        Ok(LogRow {
            iter: self.iteration,
            lr,
            loss,
            wall_ms,
        })
    }

    /// Mean PSNR of the model and of the bicubic baseline over whole clips.
    pub fn validate(&self, data: &[SequenceSample]) -> Result<(f64, f64)> {
        ensure!(!data.is_empty(), "empty validation set");
        let (net, store) = EvDeblurVsr::new_frozen(&self.cfg.model, self.cfg.train.seed, DType::F32)?;
        store.load(&self.store.snapshot()?)?;
        let (mut model, mut base) = (0.0, 0.0);
        for s in data {
            let b = clip_batch(std::slice::from_ref(s), &self.device)?;
            let pred = net.forward(&b.input)?.clamp(0f32, 1f32)?;
            let frames = crate::infer::to_frames(&pred.squeeze(0)?)?;
            let bic = crate::infer::to_frames(&b.input.bicubic.squeeze(0)?)?;
            for ((p, q), g) in frames.iter().zip(&bic).zip(&s.sharp_hr) {
                model += psnr(p.view(), g.view())?.db / s.len() as f64;
                base += psnr(q.view(), g.view())?.db / s.len() as f64;
            }
        }
        Ok((model / data.len() as f64, base / data.len() as f64))
    }

    /// Run until `total_iters` (or `stop_at`, if earlier). Logs go to
    /// `log`; checkpoints and validation rows go under `out` when given.
    pub fn fit(
        &mut self,
        data: &[SequenceSample],
        val: Option<&[SequenceSample]>,
        out: Option<&Path>,
        log: &mut dyn Write,
        stop_at: Option<u64>,
    ) -> Result<()> {
        ensure!(!data.is_empty(), "training set is empty");
        let total = self.cfg.train.total_iters;
        let end = stop_at.map_or(total, |s| s.min(total));
        let every = self.cfg.train.checkpoint_every;
        let val_every = self.cfg.train.val_every;
        let io = |e: std::io::Error| Error::io("training log", e);
        if self.iteration == 0 {
            writeln!(log, "{LOG_HEADER}").map_err(io)?;
            if let Some(dir) = out {
                self.save(dir, "init.ckpt")?;
            }
        }
        while self.iteration < end {
            let row = self.step(data)?;
            writeln!(log, "{}", row.render()).map_err(io)?;
            if let (Some(dir), true) = (out, every > 0 && self.iteration % every == 0) {
                self.save(dir, &checkpoint_name(self.iteration))?;
                self.save(dir, "latest.ckpt")?;
            }
            if let (Some(v), Some(dir), true) = (val, out, val_every > 0 && self.iteration % val_every == 0) {
                self.append_validation(v, dir)?;
            }
        }
        log.flush().map_err(io)?;
        if let Some(dir) = out {
            self.save(dir, "latest.ckpt")?;
            if self.iteration == total {
                self.save(dir, "final.ckpt")?;
            }
        }
        Ok(())
    }

    fn append_validation(&self, val: &[SequenceSample], dir: &Path) -> Result<()> {
        let (p, b) = self.validate(val)?;
        let path = dir.join("val.csv");
        let fresh = !path.exists();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        if fresh {
            writeln!(f, "{VAL_HEADER}").map_err(|e| Error::io(&path, e))?;
        }
        writeln!(f, "{}, {p:.6}, {b:.6}", self.iteration).map_err(|e| Error::io(&path, e))
    }

    pub fn save(&self, dir: &Path, name: &str) -> Result<()> {
        self.checkpoint()?.save(&dir.join(name))
    }
}

fn adam_params(cfg: &RunConfig) -> AdamParams {
    AdamParams {
        beta1: cfg.train.beta1,
        beta2: cfg.train.beta2,
        eps: cfg.train.adam_eps,
    }
}
