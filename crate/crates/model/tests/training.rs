use candle_core::Device;
use evdvsr_model::batch::{clip_batch, crop, flip, temporal_window, BatchSampler};
use evdvsr_model::checkpoint::Checkpoint;
use evdvsr_model::fixtures::{miniature_config, random_sample};
use evdvsr_model::loss::objective;
use evdvsr_model::train::{LogRow, Trainer, LOG_HEADER};
use evdvsr_model::{Error, RunConfig};

fn tiny_run() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model = miniature_config();
    cfg.train.clip_length = 3;
    cfg.train.crop_size = 8;
    cfg.train.batch_size = 2;
    cfg.train.total_iters = 6;
    cfg.train.base_lr = 2e-3;
    cfg.train.checkpoint_every = 2;
    cfg.train.log_wall_clock = false;
    cfg
}

fn data(cfg: &RunConfig) -> Vec<evdvsr_core::sample::SequenceSample> {
    (0..2).map(|i| random_sample(5, 12, 12, cfg.model.bins, cfg.model.scale, 40 + i)).collect()
}

fn params(t: &Trainer) -> Vec<Vec<u32>> {
    t.store
        .iter()
        .map(|(_, v)| v.as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap().iter().map(|x| x.to_bits()).collect())
        .collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let mut cfg = tiny_run();
    cfg.train.base_lr = 0.0;
    cfg.train.lr_min = 0.0;
    let mut t = Trainer::new(&cfg).unwrap();
    let before = params(&t);
    t.step(&data(&cfg)).unwrap();
    assert_eq!(params(&t), before);
    assert_eq!(t.iteration, 1);
}

#[test]
fn first_step_loss_equals_bicubic_baseline_loss() {
    let cfg = tiny_run();
    let d = data(&cfg);
    let mut t = Trainer::new(&cfg).unwrap();
    let batch = clip_batch(&d, &Device::Cpu).unwrap();
    let (_, base) = objective(&batch.input.bicubic, &batch.gt, &batch.mask, cfg.train.eta, true, true).unwrap();
    let got = t.train_step(&batch).unwrap();
    assert_eq!(got, base);
}

#[test]
fn loss_decreases_when_fitting_one_batch() {
    let cfg = tiny_run();
    let d = data(&cfg);
    let batch = clip_batch(&d[..1], &Device::Cpu).unwrap();
    let mut t = Trainer::new(&cfg).unwrap();
    let first = t.train_step(&batch).unwrap().total;
    let mut last = first;
    for _ in 0..15 {
        last = t.train_step(&batch).unwrap().total;
    }
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn non_finite_loss_reports_divergence_with_iteration() {
    let cfg = tiny_run();
    let d = data(&cfg);
    let mut batch = clip_batch(&d[..1], &Device::Cpu).unwrap();
    let mut t = Trainer::new(&cfg).unwrap();
    t.train_step(&batch).unwrap();
    batch.gt = (batch.gt * f64::NAN).unwrap();
    match t.train_step(&batch) {
        Err(Error::Divergence { iteration, .. }) => assert_eq!(iteration, 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

fn run_to_end(cfg: &RunConfig, out: &std::path::Path) -> (String, Trainer) {
    let d = data(cfg);
    let mut t = Trainer::new(cfg).unwrap();
    let mut log = Vec::new();
    t.fit(&d, None, Some(out), &mut log, None).unwrap();
    (String::from_utf8(log).unwrap(), t)
}

#[test]
fn fixed_seed_runs_are_bitwise_identical() {
    let cfg = tiny_run();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (log_a, ta) = run_to_end(&cfg, a.path());
    let (log_b, tb) = run_to_end(&cfg, b.path());
    assert_eq!(log_a, log_b);
    assert_eq!(params(&ta), params(&tb));
    assert_eq!(
        std::fs::read(a.path().join("final.ckpt")).unwrap(),
        std::fs::read(b.path().join("final.ckpt")).unwrap()
    );
    let lines: Vec<_> = log_a.lines().collect();
    assert_eq!(lines[0], LOG_HEADER);
    assert_eq!(lines.len(), 1 + cfg.train.total_iters as usize);
    let rows: Vec<LogRow> = lines[1..].iter().map(|l| LogRow::parse(l).unwrap()).collect();
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), (1..=6).collect::<Vec<u64>>());
    assert!(rows.iter().all(|r| r.wall_ms == 0 && r.loss.total.is_finite()));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let cfg = tiny_run();
    let d = data(&cfg);
    let full = tempfile::tempdir().unwrap();
    let (full_log, full_t) = run_to_end(&cfg, full.path());

    let part = tempfile::tempdir().unwrap();
    let mut t = Trainer::new(&cfg).unwrap();
    let mut log = Vec::new();
    t.fit(&d, None, Some(part.path()), &mut log, Some(4)).unwrap();
    drop(t);
    let ck = Checkpoint::load(&part.path().join("latest.ckpt")).unwrap();
    assert_eq!(ck.iteration, 4);
    let mut resumed = Trainer::resume(&ck, &cfg).unwrap();
    resumed.fit(&d, None, Some(part.path()), &mut log, None).unwrap();
    assert_eq!(String::from_utf8(log).unwrap(), full_log);
    assert_eq!(params(&resumed), params(&full_t));
    for name in ["ckpt_00000006.ckpt", "final.ckpt"] {
        assert_eq!(
            std::fs::read(part.path().join(name)).unwrap(),
            std::fs::read(full.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn zero_iterations_checkpoint_equals_initialization() {
    let mut cfg = tiny_run();
    cfg.train.total_iters = 0;
    let dir = tempfile::tempdir().unwrap();
    let (_, t) = run_to_end(&cfg, dir.path());
    let ck = Checkpoint::load(&dir.path().join("final.ckpt")).unwrap();
    assert_eq!(ck.iteration, 0);
    let fresh = Trainer::new(&cfg).unwrap();
    let restored = Trainer::resume(&ck, &cfg).unwrap();
    assert_eq!(params(&restored), params(&fresh));
    assert_eq!(params(&t), params(&fresh));
}

#[test]
fn resume_rejects_a_different_model() {
    let cfg = tiny_run();
    let t = Trainer::new(&cfg).unwrap();
    let ck = t.checkpoint().unwrap();
    let mut other = cfg.clone();
    other.model.use_fga = false;
    assert!(Trainer::resume(&ck, &other).is_err());
}

#[test]
fn checkpoint_preserves_every_tensor_bitwise() {
    let cfg = tiny_run();
    let mut t = Trainer::new(&cfg).unwrap();
    t.step(&data(&cfg)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ck = t.checkpoint().unwrap();
    ck.save(&dir.path().join("x.ckpt")).unwrap();
    let back = Checkpoint::load(&dir.path().join("x.ckpt")).unwrap();
    assert_eq!(ck.tensors.len(), 3 * t.store.len());
    for ((na, a), (nb, b)) in ck.tensors.iter().zip(&back.tensors) {
        assert_eq!(na, nb);
        let (a, b) = (a.flatten_all().unwrap().to_vec1::<f32>().unwrap(), b.flatten_all().unwrap().to_vec1::<f32>().unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), "{na}");
    }
}

#[test]
fn augmentation_is_consistent_across_tensors() {
    let s = random_sample(4, 12, 16, 3, 2, 7);
    assert_eq!(flip(&flip(&s, true, true).unwrap(), true, true).unwrap(), s);
    let c = crop(&s, 2, 4, 8).unwrap();
    assert_eq!(c.inputs.lr_size(), (8, 8));
    assert_eq!(c.sharp_hr[0].dim(), (3, 16, 16));
    assert_eq!(c.sharp_hr[1][[2, 0, 0]], s.sharp_hr[1][[2, 4, 8]]);
    assert_eq!(c.inputs.fwd_voxels[0].data[[1, 0, 0]], s.inputs.fwd_voxels[0].data[[1, 2, 4]]);
    let w = temporal_window(&s, 1, 2).unwrap();
    assert_eq!(w.len(), 2);
    assert_eq!(w.inputs.bwd_voxels.len(), 1);
    assert_eq!(w.inputs.bwd_voxels[0], s.inputs.bwd_voxels[1]);
    let f = flip(&s, true, false).unwrap();
    assert_eq!(f.inputs.intra_voxels[0].data[[0, 0, 0]], s.inputs.intra_voxels[0].data[[0, 0, 15]]);
    assert_eq!(f.edge_masks[0][[0, 0, 0]], s.edge_masks[0][[0, 0, 31]]);
}

#[test]
fn sampler_state_restores_the_stream() {
    let cfg = tiny_run();
    let d = data(&cfg);
    let mut a = BatchSampler::new(3);
    a.sample(&d, &cfg.train).unwrap();
    let mut b = BatchSampler::restore(a.seed(), a.word_pos());
    assert_eq!(a.sample(&d, &cfg.train).unwrap(), b.sample(&d, &cfg.train).unwrap());
    let mut short = cfg.train.clone();
    short.clip_length = 9;
    assert!(a.sample(&d, &short).is_err());
}

#[test]
fn center_crop_flag_takes_the_middle_window() {
    let mut cfg = tiny_run();
    cfg.train.center_crop = true;
    cfg.train.flip_prob_h = 0.0;
    cfg.train.flip_prob_v = 0.0;
    cfg.train.clip_length = 5;
    let d = vec![random_sample(5, 12, 12, 3, 2, 1)];
    let s = BatchSampler::new(0).sample(&d, &cfg.train).unwrap();
    assert_eq!(s, crop(&d[0], 2, 2, 8).unwrap());
}
