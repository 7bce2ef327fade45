//! Planar image helpers. Frames are `channels × height × width` arrays of `f32`
//! with nominal range `[0, 1]`.

use std::path::Path;

use image::{ImageBuffer, Rgb};
use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};

use crate::error::{ensure, Error, Result};

pub type Frame = Array3<f32>;
pub type GrayFrame = Array2<f32>;

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

pub fn luma(frame: ArrayView3<f32>) -> GrayFrame {
    match frame.dim().0 {
        1 => frame.index_axis(Axis(0), 0).to_owned(),
        _ => {
            let (_, h, w) = frame.dim();
            let mut out = Array2::zeros((h, w));
            for (c, weight) in LUMA_WEIGHTS.iter().enumerate() {
                out.scaled_add(*weight, &frame.index_axis(Axis(0), c));
            }
            out
        }
    }
}

pub fn gray_to_rgb(gray: ArrayView2<f32>) -> Frame {
    let (h, w) = gray.dim();
    let mut out = Array3::zeros((3, h, w));
    for mut plane in out.outer_iter_mut() {
        plane.assign(&gray);
    }
    out
}

pub fn flip_horizontal<T: Clone>(a: ArrayView3<T>) -> Array3<T> {
    a.slice(s![.., .., ..;-1]).to_owned()
}

pub fn flip_vertical<T: Clone>(a: ArrayView3<T>) -> Array3<T> {
    a.slice(s![.., ..;-1, ..]).to_owned()
}

/// Crop `(top, left, height, width)` out of every channel.
pub fn crop(a: ArrayView3<f32>, top: usize, left: usize, height: usize, width: usize) -> Result<Frame> {
    let (_, h, w) = a.dim();
    ensure!(
        top + height <= h && left + width <= w,
        "crop {height}x{width}+{top}+{left} exceeds {h}x{w}"
    );
    Ok(a.slice(s![.., top..top + height, left..left + width]).to_owned())
}

pub fn clamp_unit(frame: &mut Frame) {
    frame.mapv_inplace(|v| v.clamp(0.0, 1.0));
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write an 8-bit RGB PNG. Single-channel frames are replicated.
pub fn save_png(frame: ArrayView3<f32>, path: &Path) -> Result<()> {
    let (c, h, w) = frame.dim();
    ensure!(c == 1 || c == 3, "cannot save {c}-channel frame as PNG");
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |ch: usize| to_u8(frame[[ch.min(c - 1), y as usize, x as usize]]);
        Rgb([px(0), px(1), px(2)])
    });
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_png(path: &Path) -> Result<Frame> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let mut out = Array3::zeros((3, h as usize, w as usize));
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            out[[c, y as usize, x as usize]] = f32::from(px[c]) / 255.0;
        }
    }
    Ok(out)
}

/// Concatenate equally tall frames left to right.
pub fn hstack(frames: &[ArrayView3<f32>]) -> Result<Frame> {
    ensure!(!frames.is_empty(), "nothing to stack");
    ndarray::concatenate(Axis(2), frames).map_err(|e| Error::invalid(format!("hstack: {e}")))
}
