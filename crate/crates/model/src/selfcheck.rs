//! Registry of invariant checks run on procedurally generated inputs with
//! fixed seeds, plus fault injection for exercising the gate itself.

use candle_core::{DType, Device, Tensor, Var};
use evdvsr_core::events::{
    segment_events, simulate_log_events, voxelize, Event, EventStream, ExposureWindow, Polarity, TimeWindow, VoxelKind,
};
use evdvsr_core::frame::{flip_horizontal, Frame};
use evdvsr_core::metrics::{evaluate_clip, psnr, ssim, tcc, tof, Aggregation, MetricReport};
use evdvsr_core::sample::{synthesize_blur, SequenceSample};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{Ega, Hda, HdaOptions};
use crate::attention::{Cab, CrossAttention};
use crate::batch::{clip_batch, flip};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dcn::{DeformConv, TAPS};
use crate::error::Result;
use crate::fixtures::{miniature_config, random_sample, random_tensor};
use crate::gradcheck::{check_direction, check_fn, check_vars, GradCheckOptions};
use crate::loss::{loss_e, loss_r, objective};
use crate::network::EvDeblurVsr;
use crate::params::Builder;
use crate::train::Trainer;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    /// Leave the learned DCN offset residual unbounded.
    pub dcn_clamp: bool,
}

impl Faults {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "dcn-clamp" => Some(Faults { dcn_clamp: true }),
            _ => None,
        }
    }
}

/// Measured deviation against its tolerance; passes when `measured ≤ tol`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Outcome {
    fn new(measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Outcome {
            measured,
            tolerance,
            detail: detail.into(),
        }
    }

    fn exact(equal: bool, detail: impl Into<String>) -> Self {
        Outcome::new(if equal { 0.0 } else { f64::INFINITY }, 0.0, detail)
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }

    pub fn margin(&self) -> f64 {
        self.tolerance - self.measured
    }
}

pub struct Property {
    pub name: &'static str,
    pub run: fn(Faults) -> Result<Outcome>,
}

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: &'static str,
    pub outcome: std::result::Result<Outcome, String>,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(o) if o.passed())
    }

    pub fn render(&self) -> String {
        match &self.outcome {
            Ok(o) => format!(
                "{} {:<36} measured={:.3e} tol={:.1e} margin={:.3e} {}",
                if o.passed() { "PASS" } else { "FAIL" },
                self.name,
                o.measured,
                o.tolerance,
                o.margin(),
                o.detail
            ),
            Err(e) => format!("FAIL {:<36} error: {e}", self.name),
        }
    }
}

pub fn registry() -> Vec<Property> {
    macro_rules! props {
        ($($name:literal => $f:ident),* $(,)?) => { vec![$(Property { name: $name, run: $f }),*] };
    }
    props![
        "events.voxel_mass" => voxel_mass,
        "events.voxel_oracle" => voxel_oracle,
        "events.time_reversal_involution" => time_reversal,
        "events.simulator_polarity_symmetry" => simulator_symmetry,
        "events.segment_partition" => segment_partition,
        "events.blur_permutation_invariance" => blur_permutation,
        "model.identity_at_init" => identity_at_init,
        "model.softmax_normalization" => softmax_normalization,
        "model.full_gradient" => full_gradient,
        "model.dcn_degeneracy" => dcn_degeneracy,
        "model.dcn_offset_bound" => dcn_offset_bound,
        "model.determinism" => determinism,
        "training.le_mask_monotone" => le_mask_monotone,
        "training.le_l1_limit" => le_l1_limit,
        "training.le_gradient" => le_gradient,
        "training.flip_lr_invariance" => flip_lr_invariance,
        "training.checkpoint_round_trip" => checkpoint_round_trip,
        "metrics.symmetry" => metric_symmetry,
        "metrics.temporal_self_consistency" => temporal_self,
        "metrics.flip_invariance" => metric_flip,
        "metrics.aggregation_mean" => aggregation_mean,
    ]
}

pub fn run_all(faults: Faults) -> Vec<CheckLine> {
    registry()
        .into_iter()
        .map(|p| CheckLine {
            name: p.name,
            outcome: (p.run)(faults).map_err(|e| e.to_string()),
        })
        .collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_events(r: &mut ChaCha8Rng, n: usize, w: u16, h: u16, t0: i64, t1: i64) -> Vec<Event> {
    let mut ev: Vec<Event> = (0..n)
        .map(|_| Event {
            t: r.random_range(t0..=t1),
            x: r.random_range(0..w),
            y: r.random_range(0..h),
            p: if r.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative },
        })
        .collect();
    ev.sort_by_key(|e| (e.t, e.y, e.x));
    ev
}

fn random_frame(r: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Frame {
    Array3::from_shape_fn((c, h, w), |_| r.random::<f32>())
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

fn max_abs(a: &Tensor, b: &Tensor) -> Result<f64> {
    scalar(&(a.to_dtype(DType::F64)? - b.to_dtype(DType::F64)?)?.abs()?.max_all()?)
}

fn bitwise_equal(a: &Tensor, b: &Tensor) -> Result<bool> {
    let x = a.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    let y = b.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    Ok(x.len() == y.len() && x.iter().zip(&y).all(|(p, q)| p.to_bits() == q.to_bits()))
}

fn voxel_mass(_: Faults) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut r = rng(seed);
        let ev = random_events(&mut r, 300, 9, 7, 0, 10_000);
        let g = voxelize(&ev, TimeWindow::new(0.0, 10_000.0)?, 5, 9, 7, VoxelKind::InterForward)?;
        let net: f64 = ev.iter().map(|e| e.p.value()).sum();
        worst = worst.max((g.sum() - net).abs());
    }
    Ok(Outcome::new(worst, 1e-5, "|Σ voxel − Σ p| over 20 streams"))
}

fn voxel_oracle(_: Faults) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut r = rng(100 + seed);
        let (w, h, bins) = (6usize, 5usize, 1 + (seed as usize % 5));
        let ev = random_events(&mut r, 500, w as u16, h as u16, 1_000, 4_000);
        for kind in [VoxelKind::InterForward, VoxelKind::InterBackward] {
            let g = voxelize(&ev, TimeWindow::new(1_000.0, 4_000.0)?, bins, w, h, kind)?;
            let mut want = Array3::<f64>::zeros((bins, h, w));
            for e in &ev {
                let (t, p) = if kind.is_reversed() {
                    (4_000.0 - (e.t as f64 - 1_000.0), -e.p.value())
                } else {
                    (e.t as f64, e.p.value())
                };
                let tn = (bins as f64 - 1.0) * (t - 1_000.0) / 3_000.0;
                for b in 0..bins {
                    want[[b, usize::from(e.y), usize::from(e.x)]] += p * (1.0 - (b as f64 - tn).abs()).max(0.0);
                }
            }
            for (a, b) in g.data.iter().zip(want.iter()) {
                worst = worst.max((f64::from(*a) - b).abs());
            }
        }
    }
    Ok(Outcome::new(worst, 1e-5, "max |voxelize − brute force|"))
}

fn time_reversal(_: Faults) -> Result<Outcome> {
    let mut ok = true;
    for seed in 0..20 {
        let mut r = rng(200 + seed);
        let ev = random_events(&mut r, 200, 5, 5, 0, 9_999);
        let g = voxelize(&ev, TimeWindow::new(0.0, 9_999.0)?, 4, 5, 5, VoxelKind::InterForward)?;
        ok &= g.time_reversed().time_reversed().data == g.data;
    }
    Ok(Outcome::exact(ok, "reverse(reverse(V)) == V"))
}

fn simulator_symmetry(_: Faults) -> Result<Outcome> {
    let mut ok = true;
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let logs: Vec<Array2<f64>> = (0..6).map(|_| Array2::from_shape_fn((4, 5), |_| r.random_range(-3.0..0.0))).collect();
        let neg: Vec<_> = logs.iter().map(|l| l.mapv(|v| -v)).collect();
        let ts: Vec<i64> = (0..6).map(|i| i * 1_000).collect();
        let a = simulate_log_events(&logs, &ts, 0.15)?;
        let b = simulate_log_events(&neg, &ts, 0.15)?;
        let flipped: Vec<Event> = a.events().iter().map(|e| Event { p: e.p.flipped(), ..*e }).collect();
        ok &= flipped.as_slice() == b.events();
    }
    Ok(Outcome::exact(ok, "negated log sequence flips every polarity"))
}

fn segment_partition(_: Faults) -> Result<Outcome> {
    let mut ok = true;
    for seed in 0..20 {
        let mut r = rng(400 + seed);
        let k = 2 + (seed as usize % 4);
        let mut exposures = Vec::new();
        let mut t = r.random_range(0..100i64);
        for i in 0..k {
            let len = r.random_range(1..2_000i64);
            exposures.push(ExposureWindow::new(i, t, t + len)?);
            t += len + r.random_range(1..500i64);
        }
        let end = exposures[k - 1].t_end + 100;
        let stream = EventStream::new(random_events(&mut r, 500, 4, 4, 0, end), 4, 4, 0, end)?;
        let seg = segment_events(&stream, &exposures)?;
        let (m0, m1) = (exposures[0].midpoint_x2(), exposures[k - 1].midpoint_x2());
        let inside: Vec<&Event> = stream.events().iter().filter(|e| 2 * e.t > m0 && 2 * e.t <= m1).collect();
        let assigned: usize = seg.inter.iter().map(|s| s.events.len()).sum();
        ok &= assigned == inside.len();
        for e in inside {
            let hits = seg.inter.iter().filter(|s| s.events.iter().any(|x| std::ptr::eq(x, e))).count();
            ok &= hits == 1;
        }
    }
    Ok(Outcome::exact(ok, "each event in (mid_0, mid_last] lands in one inter slice"))
}

fn blur_permutation(_: Faults) -> Result<Outcome> {
    let mut ok = true;
    for seed in 0..20 {
        let mut r = rng(500 + seed);
        let frames: Vec<Frame> = (0..7).map(|_| random_frame(&mut r, 3, 5, 6)).collect();
        let mut shuffled = frames.clone();
        shuffled.shuffle(&mut r);
        let a: Vec<_> = frames.iter().map(|f| f.view()).collect();
        let b: Vec<_> = shuffled.iter().map(|f| f.view()).collect();
        ok &= synthesize_blur(&a)? == synthesize_blur(&b)?;
    }
    Ok(Outcome::exact(ok, "blur of shuffled frames is bitwise equal"))
}

fn identity_at_init(_: Faults) -> Result<Outcome> {
    let cfg = miniature_config();
    let (net, _) = EvDeblurVsr::new(&cfg, 11, DType::F32)?;
    let mut ok = true;
    for seed in 0..3 {
        let s = random_sample(3, 8, 8, cfg.bins, cfg.scale, 600 + seed);
        let b = clip_batch(&[s], &Device::Cpu)?;
        ok &= bitwise_equal(&net.forward(&b.input)?, &b.input.bicubic)?;
    }
    Ok(Outcome::exact(ok, "fresh model output == bicubic"))
}

fn softmax_normalization(_: Faults) -> Result<Outcome> {
    let mut b = Builder::new(3, DType::F32);
    let cab = Cab::new(&mut b, "cab", 8, 2)?;
    let ca = CrossAttention::new(&mut b, "ca", 8, 2)?;
    let ega = Ega::new(&mut b, "ega", 8)?;
    b.finish().randomize(4, 0.5)?;
    let x = random_tensor(&[2, 8, 5, 6], 1, -2.0, 2.0, DType::F32)?;
    let y = random_tensor(&[2, 8, 5, 6], 2, -2.0, 2.0, DType::F32)?;
    let dev = |t: Tensor, dim: usize| -> Result<f64> { Ok(scalar(&(t.sum(dim)?.to_dtype(DType::F64)? - 1.0)?.abs()?.max_all()?)?) };
    let worst = dev(cab.attention_weights(&x)?, 3)?
        .max(dev(ca.attention_weights(&x, &y)?, 3)?)
        .max(dev(ega.scores(&x, &y)?, 1)?);
    Ok(Outcome::new(worst, 1e-6, "max |Σ softmax − 1| over CAB, cross-attention, EGA"))
}

fn full_gradient(_: Faults) -> Result<Outcome> {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 21, DType::F64)?;
    store.randomize(22, 0.1)?;
    let s = random_sample(2, 8, 8, cfg.bins, cfg.scale, 23);
    let batch = clip_batch(&[s], &Device::Cpu)?.to_dtype(DType::F64)?;
    let loss = || -> Result<Tensor> {
        let pred = net.forward(&batch.input)?;
        Ok(objective(&pred, &batch.gt, &batch.mask, 1e-8, true, true)?.0)
    };
    let vars: Vec<(String, Var)> = store.iter().map(|(n, v)| (n.to_string(), v.clone())).collect();
    let o = GradCheckOptions {
        eps: 1e-6,
        tol: 1e-2,
        floor: 1e-6,
        max_entries: Some(2),
        seed: 24,
    };
    let (a, n) = check_direction(&vars, loss, &o)?;
    let dir = (a - n).abs() / a.abs().max(n.abs()).max(o.floor);
    let rep = check_vars(&vars, loss, &o)?;
    Ok(Outcome::new(
        dir.max(rep.worst_ratio),
        o.tol,
        format!("directional {a:.4e} vs {n:.4e}; {} entries, worst {}", rep.checked, rep.worst),
    ))
}

fn dcn_degeneracy(_: Faults) -> Result<Outcome> {
    let mut b = Builder::new(31, DType::F32);
    let dcn = DeformConv::new(&mut b, "dcn", 8, 8, 2)?;
    b.finish().randomize(32, 0.3)?;
    let x = random_tensor(&[2, 8, 6, 7], 33, -1.0, 1.0, DType::F32)?;
    let off = Tensor::zeros((2, 2, TAPS, 2, 6, 7), DType::F32, &Device::Cpu)?;
    let mask = Tensor::ones((2, 2, TAPS, 6, 7), DType::F32, &Device::Cpu)?;
    let got = dcn.forward(&x, &off, &mask)?;
    let want = x.conv2d(&dcn.weight, 1, 1, 1, 1)?.broadcast_add(&dcn.bias.reshape((1, 8, 1, 1))?)?;
    Ok(Outcome::new(max_abs(&got, &want)?, 1e-5, "zero offsets, unit mask vs conv2d"))
}

fn dcn_offset_bound(f: Faults) -> Result<Outcome> {
    let clamp = 10.0;
    let mut b = Builder::new(41, DType::F32);
    let mut hda = Hda::new(
        &mut b,
        "hda",
        8,
        2,
        0.0,
        HdaOptions {
            use_ega: true,
            use_fga: true,
            offset_clamp: clamp,
            skip_offset_clamp: false,
        },
    )?;
    // large weights drive the residual far past the bound
    b.finish().randomize(42, 3.0)?;
    hda.set_skip_offset_clamp(f.dcn_clamp);
    let x = |seed| random_tensor(&[1, 8, 6, 6], seed, -3.0, 3.0, DType::F32);
    let flow = random_tensor(&[1, 2, 6, 6], 47, -2.0, 2.0, DType::F32)?;
    let a = hda.align(&x(43)?, &x(44)?, &flow, &x(45)?, &x(46)?)?;
    let excess = a.offsets.broadcast_sub(&a.flow.reshape((1, 1, 1, 2, 6, 6))?)?.abs()?.max_all()?;
    Ok(Outcome::new(scalar(&excess)?, clamp, "max |offset − flow|"))
}

fn determinism(_: Faults) -> Result<Outcome> {
    let cfg = miniature_config();
    let run = || -> Result<Tensor> {
        let (net, store) = EvDeblurVsr::new(&cfg, 51, DType::F32)?;
        store.randomize(52, 0.1)?;
        let b = clip_batch(&[random_sample(3, 8, 8, cfg.bins, cfg.scale, 53)], &Device::Cpu)?;
        net.forward(&b.input)
    };
    Ok(Outcome::exact(bitwise_equal(&run()?, &run()?)?, "two identical runs"))
}

fn le_mask_monotone(_: Faults) -> Result<Outcome> {
    let pred = random_tensor(&[1, 2, 3, 4, 4], 61, 0.0, 1.0, DType::F64)?;
    let gt = random_tensor(&[1, 2, 3, 4, 4], 62, 0.0, 1.0, DType::F64)?;
    let mut mask = random_tensor(&[1, 2, 3, 4, 4], 63, 0.0, 0.5, DType::F64)?;
    let mut r = rng(64);
    let mut violations = 0.0f64;
    let mut prev = scalar(&loss_e(&pred, &gt, &mask, 1e-8)?)?;
    for _ in 0..50 {
        let mut m = mask.flatten_all()?.to_vec1::<f64>()?;
        let i = r.random_range(0..m.len());
        m[i] = (m[i] + r.random_range(0.0..0.5)).min(1.0);
        mask = Tensor::from_vec(m, mask.dims(), &Device::Cpu)?;
        let cur = scalar(&loss_e(&pred, &gt, &mask, 1e-8)?)?;
        violations = violations.max(prev - cur);
        prev = cur;
    }
    Ok(Outcome::new(violations.max(0.0), 0.0, "largest decrease after raising a mask entry"))
}

fn le_l1_limit(_: Faults) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in [1e-4f64, 1e-3, 0.05, 0.3, -0.7] {
        let pred = Tensor::from_vec(vec![d], (1, 1, 1, 1, 1), &Device::Cpu)?;
        let gt = pred.zeros_like()?;
        let v = scalar(&loss_e(&pred, &gt, &pred.ones_like()?, 1e-8)?)?;
        worst = worst.max((v - d.abs()).abs() / d.abs());
    }
    Ok(Outcome::new(worst, 1e-6, "relative gap between penalty and |diff|"))
}

fn le_gradient(_: Faults) -> Result<Outcome> {
    let gt = random_tensor(&[1, 2, 3, 3, 3], 71, 0.0, 1.0, DType::F64)?;
    let mask = random_tensor(&[1, 2, 3, 3, 3], 72, 0.0, 1.0, DType::F64)?;
    let mut r = rng(73);
    let diffs: Vec<f64> = (0..gt.elem_count())
        .map(|_| r.random_range(1e-3..0.3) * if r.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let pred = (&gt + Tensor::from_vec(diffs, gt.dims(), &Device::Cpu)?)?;
    let o = GradCheckOptions {
        eps: 1e-7,
        tol: 1e-4,
        floor: 1e-8,
        max_entries: None,
        seed: 74,
    };
    let rep = check_fn(&[("pred", pred)], |xs| loss_e(&xs[0], &gt, &mask, 1e-8), &o)?;
    Ok(Outcome::new(rep.worst_ratio, o.tol, rep.worst))
}

fn flip_lr_invariance(_: Faults) -> Result<Outcome> {
    let s = random_sample(2, 6, 8, 3, 2, 81);
    let lr = |s: &SequenceSample| -> Result<f64> {
        let b = clip_batch(std::slice::from_ref(s), &Device::Cpu)?.to_dtype(DType::F64)?;
        scalar(&loss_r(&(&b.input.bicubic * 0.9)?, &b.gt)?)
    };
    let base = lr(&s)?;
    let mut worst = 0f64;
    for (h, v) in [(true, false), (false, true), (true, true)] {
        worst = worst.max((lr(&flip(&s, h, v)?)? - base).abs() / base);
    }
    Ok(Outcome::new(worst, 1e-9, "relative change of L_r under flips of sample and GT"))
}

fn checkpoint_round_trip(_: Faults) -> Result<Outcome> {
    let mut cfg = RunConfig::default();
    cfg.model = miniature_config();
    cfg.train.clip_length = 2;
    cfg.train.crop_size = 8;
    cfg.train.batch_size = 1;
    cfg.train.total_iters = 2;
    let data = vec![random_sample(3, 8, 8, cfg.model.bins, cfg.model.scale, 91)];
    let mut t = Trainer::new(&cfg)?;
    t.step(&data)?;
    let dir = std::env::temp_dir().join(format!("evdvsr-selfcheck-{}", std::process::id()));
    let path = dir.join("rt.ckpt");
    let ck = t.checkpoint()?;
    ck.save(&path)?;
    let back = Checkpoint::load(&path)?;
    let _ = std::fs::remove_dir_all(&dir);
    let mut ok = back.tensors.len() == ck.tensors.len() && back.iteration == ck.iteration && back.adam_step == ck.adam_step;
    for ((n1, a), (n2, b)) in ck.tensors.iter().zip(&back.tensors) {
        ok &= n1 == n2 && a.dtype() == b.dtype() && bitwise_equal(a, b)?;
    }
    let restored = Trainer::resume(&back, &cfg)?;
    for ((_, a), (_, b)) in t.store.iter().zip(restored.store.iter()) {
        ok &= bitwise_equal(a.as_tensor(), b.as_tensor())?;
    }
    Ok(Outcome::exact(ok, format!("{} tensors", ck.tensors.len())))
}

fn metric_symmetry(_: Faults) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut r = rng(1000 + seed);
        let a = random_frame(&mut r, 3, 13, 15);
        let b = random_frame(&mut r, 3, 13, 15);
        worst = worst.max((psnr(a.view(), b.view())?.db - psnr(b.view(), a.view())?.db).abs());
        worst = worst.max((ssim(a.view(), b.view())? - ssim(b.view(), a.view())?).abs());
    }
    Ok(Outcome::new(worst, 1e-12, "|m(a, b) − m(b, a)| for PSNR and SSIM"))
}

fn random_clip(r: &mut ChaCha8Rng, t: usize) -> Vec<Frame> {
    (0..t).map(|_| random_frame(r, 3, 16, 16)).collect()
}

fn temporal_self(_: Faults) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let x = random_clip(&mut rng(1100 + seed), 3);
        worst = worst.max(tof(&x, &x)?.abs()).max((tcc(&x, &x)? - 1.0).abs());
    }
    Ok(Outcome::new(worst, 1e-12, "tOF(x, x) = 0 and TCC(x, x) = 1"))
}

fn metric_flip(_: Faults) -> Result<Outcome> {
    let mut r = rng(1200);
    let a = random_clip(&mut r, 3);
    let b = random_clip(&mut r, 3);
    let fl = |c: &[Frame]| c.iter().map(|f| flip_horizontal(f.view())).collect::<Vec<_>>();
    let m0 = evaluate_clip("x", &a, &b)?;
    let m1 = evaluate_clip("x", &fl(&a), &fl(&b))?;
    let worst = [(m0.psnr, m1.psnr), (m0.ssim, m1.ssim), (m0.tof, m1.tof), (m0.tcc, m1.tcc)]
        .iter()
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    Ok(Outcome::new(worst, 1e-6, "max metric change under horizontal flip"))
}

fn aggregation_mean(_: Faults) -> Result<Outcome> {
    let mut r = rng(1300);
    let mut report = MetricReport::default();
    let mut psnrs = Vec::new();
    for (i, t) in [2usize, 4, 3].into_iter().enumerate() {
        let a = random_clip(&mut r, t);
        let b = random_clip(&mut r, t);
        let m = evaluate_clip(&format!("c{i}"), &a, &b)?;
        psnrs.push(m.psnr);
        report.push(m);
    }
    let agg = report.aggregate(Aggregation::PerClip).expect("non-empty");
    let mean = psnrs.iter().sum::<f64>() / psnrs.len() as f64;
    Ok(Outcome::new((agg.psnr - mean).abs(), 1e-9, "aggregate PSNR vs mean of clips"))
}
