//! Deterministic pyramidal Lucas–Kanade flow used by the tOF metric. No
//! learned weights, fixed iteration counts, sequential `f64` arithmetic.

use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkParams {
    pub levels: usize,
    pub iterations: usize,
    pub window_radius: usize,
    /// Tikhonov term added to the structure tensor; textureless regions
    /// resolve to zero flow instead of blowing up.
    pub regularization: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        LkParams {
            levels: 3,
            iterations: 5,
            window_radius: 2,
            regularization: 1e-4,
        }
    }
}

/// Dense flow `(u, v)` such that `a(x, y) ≈ b(x + u, y + v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl Flow {
    fn zeros(h: usize, w: usize) -> Self {
        Flow {
            u: Array2::zeros((h, w)),
            v: Array2::zeros((h, w)),
        }
    }

    /// Mean per-pixel L1 distance `|du| + |dv|`.
    pub fn mean_l1_distance(&self, other: &Flow) -> f64 {
        let n = self.u.len() as f64;
        let du: f64 = self.u.iter().zip(other.u.iter()).map(|(a, b)| (a - b).abs()).sum();
        let dv: f64 = self.v.iter().zip(other.v.iter()).map(|(a, b)| (a - b).abs()).sum();
        (du + dv) / n
    }
}

/// Binomial `[1, 3, 3, 1] / 8` low-pass along both axes, then decimate;
/// coarse pixel `y` is centered on fine position `2y + 0.5`.
fn halve(img: &Array2<f64>) -> Array2<f64> {
    const K: [f64; 4] = [0.125, 0.375, 0.375, 0.125];
    let (h, w) = img.dim();
    let (oh, ow) = ((h / 2).max(1), (w / 2).max(1));
    let at = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let rows = Array2::from_shape_fn((oh, w), |(y, x)| {
        (0..4).map(|k| K[k] * img[[at(2 * y as isize - 1 + k as isize, h), x]]).sum::<f64>()
    });
    Array2::from_shape_fn((oh, ow), |(y, x)| {
        (0..4).map(|k| K[k] * rows[[y, at(2 * x as isize - 1 + k as isize, w)]]).sum::<f64>()
    })
}

/// Bilinear sample with border clamping.
pub fn sample_bilinear(img: &Array2<f64>, x: f64, y: f64) -> f64 {
    let (h, w) = img.dim();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = img[[y0, x0]] * (1.0 - fx) + img[[y0, x1]] * fx;
    let bottom = img[[y1, x0]] * (1.0 - fx) + img[[y1, x1]] * fx;
    top * (1.0 - fy) + bottom * fy
}

fn upsample_flow(flow: &Flow, h: usize, w: usize) -> Flow {
    let (ch, cw) = flow.u.dim();
    let sy = ch as f64 / h as f64;
    let sx = cw as f64 / w as f64;
    let up = |field: &Array2<f64>, gain: f64| {
        Array2::from_shape_fn((h, w), |(y, x)| {
            let cy = (y as f64 + 0.5) * sy - 0.5;
            let cx = (x as f64 + 0.5) * sx - 0.5;
            gain * sample_bilinear(field, cx, cy)
        })
    };
    Flow {
        u: up(&flow.u, 1.0 / sx),
        v: up(&flow.v, 1.0 / sy),
    }
}

/// Central-difference gradients with replicated borders.
fn gradients(img: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (h, w) = img.dim();
    let at = |y: isize, x: isize| img[[y.clamp(0, h as isize - 1) as usize, x.clamp(0, w as isize - 1) as usize]];
    let gx = Array2::from_shape_fn((h, w), |(y, x)| {
        let (y, x) = (y as isize, x as isize);
        0.5 * (at(y, x + 1) - at(y, x - 1))
    });
    let gy = Array2::from_shape_fn((h, w), |(y, x)| {
        let (y, x) = (y as isize, x as isize);
        0.5 * (at(y + 1, x) - at(y - 1, x))
    });
    (gx, gy)
}

/// Gauss-Newton iterations of windowed Lucas-Kanade; every window is
/// translated rigidly by the flow of its center pixel.
fn refine(a: &Array2<f64>, b: &Array2<f64>, flow: &mut Flow, p: &LkParams) {
    let (h, w) = a.dim();
    let r = p.window_radius as isize;
    let (ix, iy) = gradients(a);
    let (xmax, ymax) = ((w - 1) as f64, (h - 1) as f64);
    for _ in 0..p.iterations {
        let mut next = flow.clone();
        for y in 0..h {
            for x in 0..w {
                let (u, v) = (flow.u[[y, x]], flow.v[[y, x]]);
                let (mut sxx, mut sxy, mut syy, mut sxt, mut syt) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                        let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        let (sx, sy) = (xx as f64 + u, yy as f64 + v);
                        // samples that left the image carry no information about the motion
                        if !(0.0..=xmax).contains(&sx) || !(0.0..=ymax).contains(&sy) {
                            continue;
                        }
                        let gt = sample_bilinear(b, sx, sy) - a[[yy, xx]];
                        let (gx, gy) = (ix[[yy, xx]], iy[[yy, xx]]);
                        sxx += gx * gx;
                        sxy += gx * gy;
                        syy += gy * gy;
                        sxt += gx * gt;
                        syt += gy * gt;
                    }
                }
                let (a11, a22) = (sxx + p.regularization, syy + p.regularization);
                let det = a11 * a22 - sxy * sxy;
                next.u[[y, x]] = u + (-a22 * sxt + sxy * syt) / det;
                next.v[[y, x]] = v + (sxy * sxt - a11 * syt) / det;
            }
        }
        *flow = next;
    }
}

pub fn pyramidal_flow(a: &Array2<f64>, b: &Array2<f64>, params: &LkParams) -> Flow {
    assert_eq!(a.dim(), b.dim(), "flow inputs must match");
    let mut pa = vec![a.clone()];
    let mut pb = vec![b.clone()];
    for _ in 1..params.levels.max(1) {
        let (na, nb) = (halve(pa.last().unwrap()), halve(pb.last().unwrap()));
        pa.push(na);
        pb.push(nb);
    }
    let (ch, cw) = pa.last().unwrap().dim();
    let mut flow = Flow::zeros(ch, cw);
    for level in (0..pa.len()).rev() {
        let (h, w) = pa[level].dim();
        if flow.u.dim() != (h, w) {
            flow = upsample_flow(&flow, h, w);
        }
        refine(&pa[level], &pb[level], &mut flow, params);
    }
    flow
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(h: usize, w: usize, shift: f64) -> Array2<f64> {
        Array2::from_shape_fn((h, w), |(y, x)| {
            let (x, y) = (x as f64 - shift, y as f64);
            0.5 + 0.2 * (0.31 * x + 0.17 * y).sin() + 0.15 * (0.23 * x - 0.41 * y).cos()
                + 0.1 * (0.11 * x * 0.7 + 0.53 * y).sin()
        })
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let a = texture(32, 32, 0.0);
        let f = pyramidal_flow(&a, &a, &LkParams::default());
        assert!(f.u.iter().chain(f.v.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn recovers_global_translation() {
        let a = texture(48, 48, 0.0);
        let b = texture(48, 48, 2.0);
        let f = pyramidal_flow(&a, &b, &LkParams::default());
        let mut sum = 0.0;
        let mut n = 0.0;
        for y in 6..42 {
            for x in 6..42 {
                sum += f.u[[y, x]];
                n += 1.0;
            }
        }
        let mean = sum / n;
        assert!((mean - 2.0).abs() < 0.1, "mean u = {mean}");
    }

    #[test]
    fn flat_images_give_zero_flow() {
        let a = Array2::from_elem((16, 16), 0.3);
        let b = Array2::from_elem((16, 16), 0.6);
        let f = pyramidal_flow(&a, &b, &LkParams::default());
        assert!(f.u.iter().all(|v| v.abs() < 1e-9));
    }
}
