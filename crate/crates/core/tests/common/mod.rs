//! Brute-force reference implementations shared by the integration suites.
#![allow(dead_code)]

use evdvsr_core::events::{Event, Polarity};
use evdvsr_core::Frame;
use ndarray::{Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_frame(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Frame {
    Array3::from_shape_fn((c, h, w), |_| rng.random::<f32>())
}

/// Sorted random events inside `[t0, t1]`.
pub fn random_events(rng: &mut ChaCha8Rng, n: usize, w: u16, h: u16, t0: i64, t1: i64) -> Vec<Event> {
    let mut ev: Vec<Event> = (0..n)
        .map(|_| Event {
            t: rng.random_range(t0..=t1),
            x: rng.random_range(0..w),
            y: rng.random_range(0..h),
            p: if rng.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative },
        })
        .collect();
    ev.sort_by_key(|e| (e.t, e.y, e.x));
    ev
}

/// Every bin tested against every event with the tent weight.
pub fn voxel_oracle(events: &[Event], t0: f64, t1: f64, bins: usize, h: usize, w: usize, reversed: bool) -> Array3<f64> {
    let mut out = Array3::<f64>::zeros((bins, h, w));
    for e in events {
        let (t, p) = if reversed {
            (t1 - (e.t as f64 - t0), -e.p.value())
        } else {
            (e.t as f64, e.p.value())
        };
        let tn = (bins as f64 - 1.0) * (t - t0) / (t1 - t0);
        for b in 0..bins {
            let wgt = (1.0 - (b as f64 - tn).abs()).max(0.0);
            out[[b, usize::from(e.y), usize::from(e.x)]] += p * wgt;
        }
    }
    out
}

pub fn blur_oracle(frames: &[Frame]) -> Array3<f64> {
    let (c, h, w) = frames[0].dim();
    let mut out = Array3::<f64>::zeros((c, h, w));
    for k in 0..c {
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for f in frames {
                    s += f64::from(f[[k, y, x]]);
                }
                out[[k, y, x]] = s / frames.len() as f64;
            }
        }
    }
    out
}

pub fn psnr_oracle(a: &Frame, b: &Frame) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for (p, q) in a.iter().zip(b.iter()) {
        let d = f64::from(*p) - f64::from(*q);
        s += d * d;
        n += 1;
    }
    10.0 * (1.0 / (s / n as f64)).log10()
}

/// SSIM with the full 2-D Gaussian window evaluated at every valid position.
pub fn ssim_oracle(a: &Frame, b: &Frame) -> f64 {
    let (c, h, w) = a.dim();
    let r = 5i64;
    let sigma = 1.5f64;
    let mut win = vec![vec![0.0f64; 11]; 11];
    let mut z = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            win[(dy + r) as usize][(dx + r) as usize] = v;
            z += v;
        }
    }
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    for k in 0..c {
        let mut acc = 0.0;
        let mut count = 0usize;
        for y in 0..h - 10 {
            for x in 0..w - 10 {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let g = win[i][j] / z;
                        let pa = f64::from(a[[k, y + i, x + j]]);
                        let pb = f64::from(b[[k, y + i, x + j]]);
                        ma += g * pa;
                        mb += g * pb;
                        saa += g * pa * pa;
                        sbb += g * pb * pb;
                        sab += g * pa * pb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    total / c as f64
}

pub fn max_abs_diff32(a: &Array3<f32>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| (f64::from(x) - y).abs()).fold(0.0, f64::max)
}

pub fn clip_tensor(frames: &[Frame]) -> Array4<f32> {
    let (c, h, w) = frames[0].dim();
    Array4::from_shape_fn((frames.len(), c, h, w), |(t, k, y, x)| frames[t][[k, y, x]])
}
