//! Bicubic resampling with the Keys kernel (`a = -0.5`), antialiased when
//! shrinking, with symmetric border extension. Matches the behaviour of the
//! classic `imresize(..., 'bicubic')` used to build LR/HR training pairs.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};

use crate::error::{ensure, Result};
use crate::frame::Frame;

fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax <= 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Source taps `(index, weight)` for every output coordinate along one axis.
#[derive(Debug, Clone)]
pub struct Taps {
    taps: Vec<Vec<(usize, f64)>>,
}

fn mirror(i: i64, len: usize) -> usize {
    let period = 2 * len as i64;
    let m = i.rem_euclid(period);
    if m < len as i64 {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

impl Taps {
    pub fn new(in_len: usize, out_len: usize) -> Self {
        let scale = out_len as f64 / in_len as f64;
        let (kscale, width) = if scale < 1.0 {
            (scale, 4.0 / scale)
        } else {
            (1.0, 4.0)
        };
        let n = width.ceil() as i64 + 2;
        let taps = (0..out_len)
            .map(|i| {
                let center = (i as f64 + 0.5) / scale - 0.5;
                let left = (center - width / 2.0).floor() as i64;
                let mut raw: Vec<(i64, f64)> = (0..n)
                    .map(|k| {
                        let j = left + k;
                        (j, kscale * cubic(kscale * (center - j as f64)))
                    })
                    .filter(|(_, w)| *w != 0.0)
                    .collect();
                let total: f64 = raw.iter().map(|(_, w)| w).sum();
                for (_, w) in raw.iter_mut() {
                    *w /= total;
                }
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
                for (j, w) in raw {
                    let src = mirror(j, in_len);
                    match merged.iter_mut().find(|(s, _)| *s == src) {
                        Some(entry) => entry.1 += w,
                        None => merged.push((src, w)),
                    }
                }
                merged
            })
            .collect();
        Taps { taps }
    }

    pub fn out_len(&self) -> usize {
        self.taps.len()
    }

    fn apply<'a>(&'a self, src: impl Fn(usize) -> f64 + 'a) -> impl Iterator<Item = f64> + 'a {
        self.taps
            .iter()
            .map(move |row| row.iter().map(|&(j, w)| w * src(j)).sum())
    }
}

/// Resize one plane to `out_h × out_w`; rows first, then columns.
pub fn resize_plane(plane: ArrayView2<f32>, rows: &Taps, cols: &Taps) -> Array2<f32> {
    let w = plane.dim().1;
    let out_h = rows.out_len();
    let out_w = cols.out_len();
    let mut tmp = Array2::<f64>::zeros((out_h, w));
    for x in 0..w {
        for (y, v) in rows.apply(|j| f64::from(plane[[j, x]])).enumerate() {
            tmp[[y, x]] = v;
        }
    }
    let mut out = Array2::<f32>::zeros((out_h, out_w));
    for y in 0..out_h {
        for (x, v) in cols.apply(|j| tmp[[y, j]]).enumerate() {
            out[[y, x]] = v as f32;
        }
    }
    out
}

pub fn resize_bicubic(frame: ArrayView3<f32>, out_h: usize, out_w: usize) -> Result<Frame> {
    let (c, h, w) = frame.dim();
    ensure!(h > 0 && w > 0 && out_h > 0 && out_w > 0, "empty resize {h}x{w} -> {out_h}x{out_w}");
    let rows = Taps::new(h, out_h);
    let cols = Taps::new(w, out_w);
    let mut out = Array3::zeros((c, out_h, out_w));
    for (mut dst, src) in out.outer_iter_mut().zip(frame.axis_iter(Axis(0))) {
        dst.assign(&resize_plane(src, &rows, &cols));
    }
    Ok(out)
}

/// Antialiased bicubic downsampling by an integer factor.
pub fn downsample_bicubic(frame: ArrayView3<f32>, scale: usize) -> Result<Frame> {
    let (_, h, w) = frame.dim();
    ensure!(scale >= 1, "scale must be positive");
    ensure!(
        h % scale == 0 && w % scale == 0,
        "frame {h}x{w} is not divisible by scale {scale}"
    );
    resize_bicubic(frame, h / scale, w / scale)
}

pub fn upsample_bicubic(frame: ArrayView3<f32>, scale: usize) -> Result<Frame> {
    let (_, h, w) = frame.dim();
    ensure!(scale >= 1, "scale must be positive");
    resize_bicubic(frame, h * scale, w * scale)
}

pub fn downsample_plane(plane: ArrayView2<f32>, scale: usize) -> Result<Array2<f32>> {
    let (h, w) = plane.dim();
    ensure!(
        scale >= 1 && h % scale == 0 && w % scale == 0,
        "plane {h}x{w} is not divisible by scale {scale}"
    );
    Ok(resize_plane(plane, &Taps::new(h, h / scale), &Taps::new(w, w / scale)))
}
