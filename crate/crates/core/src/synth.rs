//! Procedural moving-shape clips: a static textured background with a few
//! translating and rotating rectangles and textured sprites. Rendering is
//! analytic (soft edges from a signed-distance estimate), so any frame can be
//! produced on demand without holding the high-frame-rate clip in memory.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::frame::Frame;
use crate::sample::{ExposurePlan, FrameSource};

/// Sharp-frame interval in microseconds (240 fps capture).
pub const FRAME_INTERVAL_US: i64 = 4167;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub hr_height: usize,
    pub hr_width: usize,
    /// Blurry frames per clip.
    pub frames: usize,
    pub min_frames_per_exposure: usize,
    pub max_frames_per_exposure: usize,
    pub gap_frames: usize,
    /// HR pixels per sharp frame.
    pub min_speed: f64,
    pub max_speed: f64,
    pub objects: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            hr_height: 256,
            hr_width: 256,
            frames: 10,
            min_frames_per_exposure: 8,
            max_frames_per_exposure: 24,
            gap_frames: 0,
            min_speed: 0.5,
            max_speed: 3.0,
            objects: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Texture {
    Flat,
    Stripes { freq: f64, phase: f64 },
    Checker { cell: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Shape {
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
    half_w: f64,
    half_h: f64,
    angle: f64,
    spin: f64,
    color: [f64; 3],
    texture: Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: [f64; 3],
}

/// A randomly drawn scene plus its exposure plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticClip {
    pub height: usize,
    pub width: usize,
    pub frames_per_exposure: usize,
    pub plan: ExposurePlan,
    base: [f64; 3],
    waves: Vec<Wave>,
    shapes: Vec<Shape>,
}

impl SyntheticClip {
    pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Self> {
        ensure!(spec.frames >= 1, "synthetic clip needs at least one frame");
        ensure!(
            spec.min_frames_per_exposure >= 2 && spec.min_frames_per_exposure <= spec.max_frames_per_exposure,
            "invalid frames-per-exposure range"
        );
        ensure!(spec.min_speed <= spec.max_speed, "invalid speed range");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(spec.min_frames_per_exposure..=spec.max_frames_per_exposure);
        let plan = ExposurePlan::uniform(spec.frames, n, spec.gap_frames)?;
        let duration = plan.frames_needed() as f64;
        let (h, w) = (spec.hr_height as f64, spec.hr_width as f64);

        let base = [0.0; 3].map(|_: f64| rng.random_range(0.25..0.55));
        let waves = (0..3)
            .map(|_| Wave {
                fx: rng.random_range(0.5..4.0) * std::f64::consts::TAU / w,
                fy: rng.random_range(0.5..4.0) * std::f64::consts::TAU / h,
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                amp: [0.0; 3].map(|_: f64| rng.random_range(0.02..0.08)),
            })
            .collect();

        let shapes = (0..spec.objects)
            .map(|_| {
                let speed = rng.random_range(spec.min_speed..=spec.max_speed);
                let dir = rng.random_range(0.0..std::f64::consts::TAU);
                let (vx, vy) = (speed * dir.cos(), speed * dir.sin());
                // start so that the mid-clip position is well inside the frame
                let mid_x = rng.random_range(0.25 * w..0.75 * w);
                let mid_y = rng.random_range(0.25 * h..0.75 * h);
                let texture = match rng.random_range(0..3) {
                    0 => Texture::Flat,
                    1 => Texture::Stripes {
                        freq: rng.random_range(0.15..0.6),
                        phase: rng.random_range(0.0..std::f64::consts::TAU),
                    },
                    _ => Texture::Checker {
                        cell: rng.random_range(3.0..8.0),
                    },
                };
                Shape {
                    cx: mid_x - vx * duration / 2.0,
                    cy: mid_y - vy * duration / 2.0,
                    vx,
                    vy,
                    half_w: rng.random_range(0.06..0.16) * w,
                    half_h: rng.random_range(0.06..0.16) * h,
                    angle: rng.random_range(0.0..std::f64::consts::PI),
                    spin: rng.random_range(-0.02..0.02),
                    color: [0.0; 3].map(|_: f64| {
                        if rng.random_bool(0.5) {
                            rng.random_range(0.75..1.0)
                        } else {
                            rng.random_range(0.02..0.2)
                        }
                    }),
                    texture,
                }
            })
            .collect();

        Ok(SyntheticClip {
            height: spec.hr_height,
            width: spec.hr_width,
            frames_per_exposure: n,
            plan,
            base,
            waves,
            shapes,
        })
    }

    pub fn render(&self, t: f64) -> Frame {
        let mut out = Array3::zeros((3, self.height, self.width));
        for y in 0..self.height {
            for x in 0..self.width {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut c = self.base;
                for wv in &self.waves {
                    let s = (wv.fx * px + wv.fy * py + wv.phase).sin();
                    for k in 0..3 {
                        c[k] += wv.amp[k] * s;
                    }
                }
                for sh in &self.shapes {
                    let (cx, cy) = (sh.cx + sh.vx * t, sh.cy + sh.vy * t);
                    let a = sh.angle + sh.spin * t;
                    let (dx, dy) = (px - cx, py - cy);
                    let lx = dx * a.cos() + dy * a.sin();
                    let ly = -dx * a.sin() + dy * a.cos();
                    let inside = (sh.half_w - lx.abs()).min(sh.half_h - ly.abs());
                    let alpha = (inside + 0.5).clamp(0.0, 1.0);
                    if alpha == 0.0 {
                        continue;
                    }
                    let modulation = match sh.texture {
                        Texture::Flat => 1.0,
                        Texture::Stripes { freq, phase } => 0.65 + 0.35 * (freq * lx + phase).sin(),
                        Texture::Checker { cell } => {
                            let parity = ((lx / cell).floor() + (ly / cell).floor()) as i64;
                            if parity.rem_euclid(2) == 0 {
                                1.0
                            } else {
                                0.45
                            }
                        }
                    };
                    for k in 0..3 {
                        c[k] = c[k] * (1.0 - alpha) + sh.color[k] * modulation * alpha;
                    }
                }
                for k in 0..3 {
                    out[[k, y, x]] = c[k].clamp(0.0, 1.0) as f32;
                }
            }
        }
        out
    }
}

impl FrameSource for SyntheticClip {
    fn len(&self) -> usize {
        self.plan.frames_needed()
    }

    fn frame(&self, index: usize) -> Result<Frame> {
        Ok(self.render(index as f64))
    }

    fn timestamp(&self, index: usize) -> i64 {
        index as i64 * FRAME_INTERVAL_US
    }
}
