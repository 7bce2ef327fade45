use candle_core::{Device, Tensor};
use evdvsr_model::loss::{loss_e, loss_r};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Per-frame means of the per-element penalty, then the mean over frames.
fn loss_e_oracle(pred: &[f64], gt: &[f64], mask: &[f64], t: usize, per: usize, eta: f64) -> f64 {
    let mut total = 0.0;
    for f in 0..t {
        let mut s = 0.0;
        for i in 0..per {
            let k = f * per + i;
            let d = gt[k] - pred[k];
            s += mask[k] * (d * d + eta * eta).sqrt();
        }
        total += s / per as f64;
    }
    total / t as f64
}

fn loss_r_oracle(pred: &[f64], gt: &[f64]) -> f64 {
    let mut s = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        s += (p - g) * (p - g);
    }
    s / pred.len() as f64
}

#[test]
fn losses_match_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let t = rng.random_range(1..4usize);
        let (h, w) = (rng.random_range(1..6usize), rng.random_range(1..6usize));
        let per = 3 * h * w;
        let n = t * per;
        let pred = random(&mut rng, n, 0.0, 1.0);
        let gt = random(&mut rng, n, 0.0, 1.0);
        let mask = random(&mut rng, n, 0.0, 1.0);
        let shape = (1, t, 3, h, w);
        let tp = Tensor::from_vec(pred.clone(), shape, &Device::Cpu).unwrap();
        let tg = Tensor::from_vec(gt.clone(), shape, &Device::Cpu).unwrap();
        let tm = Tensor::from_vec(mask.clone(), shape, &Device::Cpu).unwrap();
        let lr = loss_r(&tp, &tg).unwrap().to_scalar::<f64>().unwrap();
        let le = loss_e(&tp, &tg, &tm, 1e-8).unwrap().to_scalar::<f64>().unwrap();
        assert!((lr - loss_r_oracle(&pred, &gt)).abs() <= 1e-7, "case {case}");
        assert!((le - loss_e_oracle(&pred, &gt, &mask, t, per, 1e-8)).abs() <= 1e-7, "case {case}");
    }
}

#[test]
fn single_channel_mask_broadcasts_over_colour() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pred = random(&mut rng, 2 * 3 * 4, 0.0, 1.0);
    let gt = random(&mut rng, 2 * 3 * 4, 0.0, 1.0);
    let m1 = random(&mut rng, 2 * 4, 0.0, 1.0);
    let full: Vec<f64> = (0..2).flat_map(|t| (0..3).flat_map(move |_| (0..4).map(move |i| (t, i)))).map(|(t, i)| m1[t * 4 + i]).collect();
    let tp = Tensor::from_vec(pred, (1, 2, 3, 2, 2), &Device::Cpu).unwrap();
    let tg = Tensor::from_vec(gt, (1, 2, 3, 2, 2), &Device::Cpu).unwrap();
    let a = loss_e(&tp, &tg, &Tensor::from_vec(m1, (1, 2, 1, 2, 2), &Device::Cpu).unwrap(), 1e-8).unwrap();
    let b = loss_e(&tp, &tg, &Tensor::from_vec(full, (1, 2, 3, 2, 2), &Device::Cpu).unwrap(), 1e-8).unwrap();
    assert!((a.to_scalar::<f64>().unwrap() - b.to_scalar::<f64>().unwrap()).abs() < 1e-15);
}
