use candle_core::DType;
use evdvsr_core::metrics::psnr;
use evdvsr_model::fixtures::{miniature_config, random_sample};
use evdvsr_model::infer::restore;
use evdvsr_model::EvDeblurVsr;

fn clip_psnr(pred: &[evdvsr_core::frame::Frame], gt: &[evdvsr_core::frame::Frame]) -> f64 {
    let v: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| psnr(p.view(), g.view()).unwrap().db).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn tiled_and_untiled_evaluation_agree_in_psnr() {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 21, DType::F32).unwrap();
    store.randomize(22, 0.05).unwrap();
    let s = random_sample(3, 40, 40, cfg.bins, cfg.scale, 23);
    let whole = restore(&net, &s.inputs, 0, 0).unwrap();
    let tiled = restore(&net, &s.inputs, 32, 16).unwrap();
    let (a, b) = (clip_psnr(&whole, &s.sharp_hr), clip_psnr(&tiled, &s.sharp_hr));
    println!("untiled {a:.6} dB, tiled {b:.6} dB");
    assert!((a - b).abs() < 1e-4, "untiled {a} vs tiled {b}");
}

#[test]
fn a_single_covering_tile_is_the_untiled_result() {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 24, DType::F32).unwrap();
    store.randomize(25, 0.05).unwrap();
    let s = random_sample(2, 16, 16, cfg.bins, cfg.scale, 26);
    assert_eq!(restore(&net, &s.inputs, 0, 0).unwrap(), restore(&net, &s.inputs, 16, 4).unwrap());
}
