//! Minimal line plots rendered straight into an RGB frame.

use evdvsr_core::frame::Frame;
use ndarray::Array3;

pub const WIDTH: usize = 640;
pub const HEIGHT: usize = 400;
const LEFT: usize = 70;
const RIGHT: usize = 20;
const TOP: usize = 20;
const BOTTOM: usize = 40;

const PALETTE: [[f32; 3]; 6] = [
    [0.12, 0.47, 0.71],
    [1.0, 0.50, 0.05],
    [0.17, 0.63, 0.17],
    [0.84, 0.15, 0.16],
    [0.58, 0.40, 0.74],
    [0.55, 0.34, 0.29],
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Data ranges mapped onto the plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axes {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Axes {
    /// Tight x range over every point; y padded by 5% of its span.
    pub fn fit(series: &[Series]) -> Option<Axes> {
        let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut a, mut any) = (
            Axes {
                x_min: f64::INFINITY,
                x_max: f64::NEG_INFINITY,
                y_min: f64::INFINITY,
                y_max: f64::NEG_INFINITY,
            },
            false,
        );
        for &(x, y) in pts {
            any = true;
            a.x_min = a.x_min.min(x);
            a.x_max = a.x_max.max(x);
            a.y_min = a.y_min.min(y);
            a.y_max = a.y_max.max(y);
        }
        if !any {
            return None;
        }
        let pad = 0.05 * (a.y_max - a.y_min).max(1e-12);
        a.y_min -= pad;
        a.y_max += pad;
        Some(a)
    }

    /// Pixel column of `x`; the range ends land on the first and last
    /// columns of the plot area.
    pub fn column(&self, x: f64) -> f64 {
        let span = (WIDTH - LEFT - RIGHT - 1) as f64;
        if self.x_max > self.x_min {
            LEFT as f64 + (x - self.x_min) / (self.x_max - self.x_min) * span
        } else {
            LEFT as f64 + span / 2.0
        }
    }

    pub fn row(&self, y: f64) -> f64 {
        let span = (HEIGHT - TOP - BOTTOM - 1) as f64;
        (HEIGHT - BOTTOM - 1) as f64 - (y - self.y_min) / (self.y_max - self.y_min) * span
    }
}

struct Canvas(Frame);

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [f32; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < WIDTH && (y as usize) < HEIGHT {
            for (ch, v) in c.iter().enumerate() {
                self.0[[ch, y as usize, x as usize]] = *v;
            }
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: [f32; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    fn text(&mut self, s: &str, x: i64, y: i64, c: [f32; 3]) {
        for (i, ch) in s.chars().enumerate() {
            let rows = glyph(ch);
            for (r, bits) in rows.iter().enumerate() {
                for col in 0..3 {
                    if bits & (0b100 >> col) != 0 {
                        for (ox, oy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            self.put(x + i as i64 * 8 + col * 2 + ox, y + r as i64 * 2 + oy, c);
                        }
                    }
                }
            }
        }
    }
}

/// 3×5 bitmaps for the characters needed by axis labels.
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '.' => [0, 0, 0, 0, 2],
        '-' => [0, 0, 7, 0, 0],
        'e' => [0, 7, 7, 4, 7],
        '+' => [0, 2, 7, 2, 0],
        _ => [0; 5],
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e5) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Render every series on shared axes. Returns `None` when no finite point
/// exists.
pub fn render(series: &[Series]) -> Option<(Frame, Axes)> {
    let axes = Axes::fit(series)?;
    let mut c = Canvas(Array3::from_elem((3, HEIGHT, WIDTH), 1.0));
    let grey = [0.85; 3];
    let black = [0.0; 3];
    let (l, r) = (LEFT as i64, (WIDTH - RIGHT - 1) as i64);
    let (t, b) = (TOP as i64, (HEIGHT - BOTTOM - 1) as i64);
    for k in 1..4 {
        let y = t + (b - t) * k / 4;
        c.line((l, y), (r, y), grey);
        let x = l + (r - l) * k / 4;
        c.line((x, t), (x, b), grey);
    }
    c.line((l, b), (r, b), black);
    c.line((l, t), (l, b), black);
    c.text(&label(axes.x_min), l, b + 8, black);
    let xs = label(axes.x_max);
    c.text(&xs, r - xs.len() as i64 * 8, b + 8, black);
    c.text(&label(axes.y_max), 4, t, black);
    c.text(&label(axes.y_min), 4, b - 10, black);
    for (i, s) in series.iter().enumerate() {
        let col = PALETTE[i % PALETTE.len()];
        let px: Vec<(i64, i64)> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| (axes.column(x).round() as i64, axes.row(y).round() as i64))
            .collect();
        for w in px.windows(2) {
            c.line(w[0], w[1], col);
        }
        for &(x, y) in &px {
            for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
                c.put(x + dx, y + dy, col);
            }
        }
    }
    Some((c.0, axes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_ends_map_to_plot_edges() {
        let s = vec![Series {
            name: "a".into(),
            points: vec![(3.0, 1.0), (10.0, 2.0), (17.0, 0.5)],
        }];
        let (img, axes) = render(&s).unwrap();
        assert_eq!((axes.x_min, axes.x_max), (3.0, 17.0));
        assert_eq!(axes.column(3.0), LEFT as f64);
        assert_eq!(axes.column(17.0), (WIDTH - RIGHT - 1) as f64);
        assert_eq!(img.dim(), (3, HEIGHT, WIDTH));
        assert!(axes.row(2.0) > TOP as f64 && axes.row(0.5) < (HEIGHT - BOTTOM) as f64);
    }

    #[test]
    fn empty_or_non_finite_input_has_no_plot() {
        assert!(render(&[]).is_none());
        let s = vec![Series {
            name: "a".into(),
            points: vec![(1.0, f64::NAN)],
        }];
        assert!(render(&s).is_none());
    }

    #[test]
    fn single_point_is_centred() {
        let s = vec![Series {
            name: "a".into(),
            points: vec![(5.0, 5.0)],
        }];
        let (_, axes) = render(&s).unwrap();
        assert_eq!((axes.x_min, axes.x_max), (5.0, 5.0));
        assert!(axes.row(5.0).is_finite());
    }
}
