use candle_core::{DType, Device, Tensor};
use evdvsr_model::batch::clip_batch;
use evdvsr_model::config::RfdOrder;
use evdvsr_model::fixtures::{miniature_config, random_sample};
use evdvsr_model::{EvDeblurVsr, ModelConfig, NetInput};

fn bits(t: &Tensor) -> Vec<u32> {
    t.flatten_all().unwrap().to_vec1::<f32>().unwrap().into_iter().map(f32::to_bits).collect()
}

fn input(cfg: &ModelConfig, t: usize, seed: u64) -> NetInput {
    clip_batch(&[random_sample(t, 8, 8, cfg.bins, cfg.scale, seed)], &Device::Cpu).unwrap().input
}

/// Replace the last frame (and the voxels touching it) of `x` with those of `y`.
fn perturb_last(x: &NetInput, y: &NetInput) -> NetInput {
    let swap = |a: &Tensor, b: &Tensor| {
        let t = a.dim(1).unwrap();
        Tensor::cat(&[&a.narrow(1, 0, t - 1).unwrap(), &b.narrow(1, t - 1, 1).unwrap()], 1).unwrap()
    };
    NetInput {
        frames: swap(&x.frames, &y.frames),
        intra: swap(&x.intra, &y.intra),
        inter_fwd: Some(swap(x.inter_fwd.as_ref().unwrap(), y.inter_fwd.as_ref().unwrap())),
        inter_bwd: Some(swap(x.inter_bwd.as_ref().unwrap(), y.inter_bwd.as_ref().unwrap())),
        bicubic: swap(&x.bicubic, &y.bicubic),
    }
}

#[test]
fn last_frame_reaches_the_first_output_only_through_the_backward_sweep() {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 1, DType::F32).unwrap();
    store.randomize(2, 0.1).unwrap();
    let x = input(&cfg, 4, 3);
    let x2 = perturb_last(&x, &input(&cfg, 4, 4));
    let a = net.trace(&x).unwrap();
    let b = net.trace(&x2).unwrap();
    // per-frame features and the forward-sweep state entering t = 0
    assert_eq!(bits(&a.fi[0]), bits(&b.fi[0]));
    assert_eq!(bits(&a.fe[0]), bits(&b.fe[0]));
    assert_eq!(bits(&a.propagation.forward_aligned[0]), bits(&b.propagation.forward_aligned[0]));
    assert_ne!(bits(&a.propagation.backward[0]), bits(&b.propagation.backward[0]));
    assert_ne!(bits(&a.propagation.output[0]), bits(&b.propagation.output[0]));
}

#[test]
fn single_frame_clip_skips_propagation() {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 5, DType::F32).unwrap();
    let x = input(&cfg, 1, 6);
    assert!(x.inter_fwd.is_none());
    let tr = net.trace(&x).unwrap();
    assert_eq!(tr.propagation.output.len(), 1);
    assert_eq!(bits(&tr.propagation.output[0]), bits(&tr.fi[0]));
    store.randomize(7, 0.1).unwrap();
    assert_eq!(net.forward(&x).unwrap().dims(), &[1, 1, 3, 16, 16]);
}

#[test]
fn identity_init_keeps_each_frame_feature() {
    let cfg = miniature_config();
    let (net, _) = EvDeblurVsr::new(&cfg, 8, DType::F32).unwrap();
    let mut x = input(&cfg, 3, 9);
    let f0 = x.frames.narrow(1, 0, 1).unwrap();
    x.frames = Tensor::cat(&[&f0, &f0, &f0], 1).unwrap();
    x.inter_fwd = Some(x.inter_fwd.unwrap().zeros_like().unwrap());
    x.inter_bwd = Some(x.inter_bwd.unwrap().zeros_like().unwrap());
    let tr = net.trace(&x).unwrap();
    for t in 0..3 {
        assert_eq!(bits(&tr.propagation.output[t]), bits(&tr.fi[t]), "frame {t}");
    }
}

#[test]
fn ablation_toggles_change_a_trained_model() {
    let base = miniature_config();
    let x = input(&base, 3, 10);
    let run = |cfg: &ModelConfig| {
        let (net, store) = EvDeblurVsr::new(cfg, 11, DType::F32).unwrap();
        store.randomize(12, 0.1).unwrap();
        bits(&net.forward(&x).unwrap())
    };
    let full = run(&base);
    for cfg in [
        ModelConfig { use_intra: false, ..base.clone() },
        ModelConfig { use_inter: false, ..base.clone() },
        ModelConfig { rfd_order: RfdOrder::EiOnly, ..base.clone() },
        ModelConfig { rfd_order: RfdOrder::EiThenIe, ..base.clone() },
    ] {
        assert_ne!(run(&cfg), full, "{cfg:?}");
    }
}

#[test]
fn propagation_rejects_length_mismatch() {
    let cfg = miniature_config();
    let (net, _) = EvDeblurVsr::new(&cfg, 13, DType::F32).unwrap();
    let mut x = input(&cfg, 3, 14);
    x.inter_fwd = Some(x.inter_fwd.unwrap().narrow(1, 0, 1).unwrap());
    assert!(net.forward(&x).is_err());
}

#[test]
fn repeated_forward_passes_are_bitwise_identical() {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 15, DType::F32).unwrap();
    store.randomize(16, 0.1).unwrap();
    let x = input(&cfg, 3, 17);
    assert_eq!(bits(&net.forward(&x).unwrap()), bits(&net.forward(&x).unwrap()));
}

#[test]
fn batched_forward_matches_per_sample_forward() {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 18, DType::F32).unwrap();
    store.randomize(19, 0.1).unwrap();
    let samples: Vec<_> = (0..3).map(|i| random_sample(3, 8, 8, cfg.bins, cfg.scale, 30 + i)).collect();
    let joint = net.forward(&clip_batch(&samples, &Device::Cpu).unwrap().input).unwrap();
    for (i, s) in samples.iter().enumerate() {
        let one = net.forward(&clip_batch(std::slice::from_ref(s), &Device::Cpu).unwrap().input).unwrap();
        let dev = (joint.narrow(0, i, 1).unwrap() - one).unwrap().abs().unwrap().flatten_all().unwrap().max(0).unwrap();
        assert!(dev.to_scalar::<f32>().unwrap() <= 1e-5, "sample {i}");
    }
}

#[test]
fn frozen_network_tracks_loaded_weights_without_a_graph() {
    let cfg = miniature_config();
    let (net, store) = EvDeblurVsr::new(&cfg, 11, DType::F32).unwrap();
    let (frozen, fstore) = EvDeblurVsr::new_frozen(&cfg, 11, DType::F32).unwrap();
    store.randomize(12, 0.1).unwrap();
    fstore.load(&store.snapshot().unwrap()).unwrap();
    let x = input(&cfg, 3, 13);
    let a = net.forward(&x).unwrap();
    let b = frozen.forward(&x).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert!(a.track_op());
    assert!(!b.track_op());
}
