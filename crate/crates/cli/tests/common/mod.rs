#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_evdvsr")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn evdvsr(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(bin());
    cmd.args(args).env_remove("EVDVSR_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out: Output = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn ok(args: &[&str]) -> Run {
    let r = evdvsr(args, &[]);
    assert_eq!(r.code, 0, "{args:?} failed\nstdout: {}\nstderr: {}", r.stdout, r.stderr);
    r
}

/// Miniature model and data: 2 clips of 3 frames, LR 16×16, scale 2.
pub const TINY: &str = "\
model.channels = 8
model.residual_blocks = 1
model.heads = 2
model.bins = 3
model.scale = 2
model.dcn_groups = 2
sim.synthetic = true
sim.clips = 2
sim.frames = 3
sim.hr_height = 32
sim.hr_width = 32
sim.min_frames_per_exposure = 8
sim.max_frames_per_exposure = 10
sim.objects = 2
sim.seed = 5
train.clip_length = 3
train.crop_size = 8
train.batch_size = 2
train.base_lr = 0.002
train.total_iters = 6
train.checkpoint_every = 2
train.log_wall_clock = false
train.seed = 7
";

fn key(line: &str) -> Option<&str> {
    line.split_once('=').map(|(k, _)| k.trim())
}

/// `TINY` with the lines of `extra` replacing any base line of the same key.
pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let replaced: Vec<&str> = extra.lines().filter_map(key).collect();
    let mut text: String = TINY
        .lines()
        .filter(|l| key(l).is_none_or(|k| !replaced.contains(&k)))
        .map(|l| format!("{l}\n"))
        .collect();
    text.push_str(extra);
    let p = dir.join("run.conf");
    std::fs::write(&p, text).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulate the tiny dataset under `dir/data`; returns (config, data dir).
pub fn tiny_dataset(dir: &Path, extra: &str) -> (PathBuf, PathBuf) {
    let data = dir.join("data");
    let cfg = write_config(dir, &format!("train.data = {}\neval.data = {}\n{extra}", s(&data), s(&data)));
    ok(&["simulate", "--config", s(&cfg), "--out", s(&data)]);
    (cfg, data)
}

/// Every file under `root` with its bytes, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// `clip -> psnr, ssim, tof, tcc` from a metrics file.
pub fn metrics(path: &Path) -> BTreeMap<String, [f64; 4]> {
    let text = std::fs::read_to_string(path).unwrap();
    evdvsr_core::metrics::parse_metric_lines(&text)
        .unwrap()
        .into_iter()
        .map(|l| (l.clip, [l.psnr, l.ssim, l.tof, l.tcc]))
        .collect()
}
