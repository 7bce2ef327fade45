use candle_core::{DType, Device, Tensor};
use evdvsr_model::align::{Hda, HdaOptions};
use evdvsr_model::attention::{Cab, CrossAttention};
use evdvsr_model::fixtures::random_tensor;
use evdvsr_model::gradcheck::{check_fn, GradCheckOptions};
use evdvsr_model::loss::loss_e;
use evdvsr_model::params::Builder;
use evdvsr_model::warp::backward_warp;

fn opts(tol: f64) -> GradCheckOptions {
    GradCheckOptions {
        eps: 1e-6,
        tol,
        floor: 1e-6,
        max_entries: None,
        seed: 9,
    }
}

fn rand(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
    random_tensor(shape, seed, lo, hi, DType::F64).unwrap()
}

#[test]
fn cross_attention_gradients_match_finite_differences() {
    let mut b = Builder::new(1, DType::F64);
    let ca = CrossAttention::new(&mut b, "ca", 2, 1).unwrap();
    b.finish().randomize(2, 0.8).unwrap();
    let q = rand(&[1, 2, 4, 4], 3, -1.0, 1.0);
    let kv = rand(&[1, 2, 4, 4], 4, -1.0, 1.0);
    let r = check_fn(&[("query", q), ("kv", kv)], |x| ca.forward(&x[0], &x[1]), &opts(1e-3)).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn cab_gradients_match_finite_differences() {
    let mut b = Builder::new(5, DType::F64);
    let cab = Cab::new(&mut b, "cab", 4, 2).unwrap();
    b.finish().randomize(6, 0.8).unwrap();
    let x = rand(&[1, 4, 4, 4], 7, -1.0, 1.0);
    let r = check_fn(&[("x", x)], |x| cab.forward(&x[0]), &opts(1e-3)).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn backward_warp_gradients_match_finite_differences() {
    let f = rand(&[1, 1, 4, 4], 8, -1.0, 1.0);
    // fractional parts stay clear of the bilinear kinks at integers
    let mut flow: Vec<f64> = rand(&[32], 9, -1.5, 1.5).to_vec1::<f64>().unwrap();
    for v in &mut flow {
        let frac = *v - v.floor();
        if !(0.1..=0.9).contains(&frac) {
            *v = v.floor() + 0.5;
        }
    }
    let flow = Tensor::from_vec(flow, (1, 2, 4, 4), &Device::Cpu).unwrap();
    let r = check_fn(&[("feature", f), ("flow", flow)], |x| backward_warp(&x[0], &x[1]), &opts(1e-3)).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn hda_gradients_match_finite_differences() {
    let mut b = Builder::new(10, DType::F64);
    let opts_hda = HdaOptions {
        use_ega: true,
        use_fga: true,
        offset_clamp: 10.0,
        skip_offset_clamp: false,
    };
    let hda = Hda::new(&mut b, "hda", 2, 1, 0.0, opts_hda).unwrap();
    b.finish().randomize(11, 0.3).unwrap();
    let h = rand(&[1, 2, 4, 4], 12, -1.0, 1.0);
    let v = rand(&[1, 2, 4, 4], 13, -1.0, 1.0);
    let fe = rand(&[1, 2, 4, 4], 14, -1.0, 1.0);
    let fi = rand(&[1, 2, 4, 4], 15, -1.0, 1.0);
    let flow = rand(&[1, 2, 4, 4], 16, 0.2, 0.4);
    let r = check_fn(
        &[("h_prev", h), ("voxel", v)],
        |x| hda.forward(&x[0], &x[1], &flow, &fe, &fi),
        &opts(1e-3),
    )
    .unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn loss_e_gradient_matches_finite_differences() {
    let gt = rand(&[1, 2, 3, 3, 3], 17, 0.0, 1.0);
    let mask = rand(&[1, 2, 3, 3, 3], 18, 0.0, 1.0);
    let sign = rand(&[1, 2, 3, 3, 3], 19, -1.0, 1.0).sign().unwrap();
    let mag = rand(&[1, 2, 3, 3, 3], 20, 1e-3, 0.3);
    let pred = (&gt + (sign * mag).unwrap()).unwrap();
    let o = GradCheckOptions {
        eps: 1e-7,
        tol: 1e-4,
        ..opts(1e-4)
    };
    let r = check_fn(&[("pred", pred)], |x| loss_e(&x[0], &gt, &mask, 1e-8), &o).unwrap();
    assert!(r.passed(), "{r:?}");
}
