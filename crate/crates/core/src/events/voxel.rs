use ndarray::{s, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::{Event, TimeWindow};
use crate::error::{ensure, Result};
use crate::frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VoxelKind {
    Intra,
    InterForward,
    /// Time-mirrored with negated polarity: the brightness process played backwards.
    InterBackward,
}

impl VoxelKind {
    pub fn is_reversed(self) -> bool {
        matches!(self, VoxelKind::InterBackward)
    }
}

/// `bins × height × width` bilinear-in-time accumulation of event polarities.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub data: Array3<f32>,
    pub kind: VoxelKind,
    pub window: TimeWindow,
}

impl VoxelGrid {
    pub fn zeros(bins: usize, height: usize, width: usize, kind: VoxelKind, window: TimeWindow) -> Self {
        VoxelGrid {
            data: Array3::zeros((bins, height, width)),
            kind,
            window,
        }
    }

    pub fn bins(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum()
    }

    /// Mirror the bin axis and negate. Applying it twice is the identity.
    pub fn time_reversed(&self) -> Self {
        let kind = match self.kind {
            VoxelKind::InterForward => VoxelKind::InterBackward,
            VoxelKind::InterBackward => VoxelKind::InterForward,
            VoxelKind::Intra => VoxelKind::Intra,
        };
        VoxelGrid {
            data: self.data.slice(s![..;-1, .., ..]).mapv(|v| -v),
            kind,
            window: self.window,
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        VoxelGrid {
            data: frame::flip_horizontal(self.data.view()),
            ..self.clone()
        }
    }

    pub fn flip_vertical(&self) -> Self {
        VoxelGrid {
            data: frame::flip_vertical(self.data.view()),
            ..self.clone()
        }
    }

    /// Signed per-pixel total over bins.
    pub fn bin_sum(&self) -> ndarray::Array2<f64> {
        self.data.map(|&v| f64::from(v)).sum_axis(Axis(0))
    }
}

/// Accumulate `events` into a voxel grid over `window`.
///
/// Each event lands at normalized time `t* = (B-1)(t - t0)/(t1 - t0)` and
/// adds `p * max(0, 1 - |b - t*|)` to bin `b`. Backward grids reuse the same
/// weights with mirrored bins and negated polarity, so a backward grid is
/// exactly the time reversal of the forward grid of the same slice.
pub fn voxelize(
    events: &[Event],
    window: TimeWindow,
    bins: usize,
    width: usize,
    height: usize,
    kind: VoxelKind,
) -> Result<VoxelGrid> {
    ensure!(bins >= 1, "voxel grid needs at least one bin");
    let window = TimeWindow::new(window.start, window.end)?;
    let mut acc = vec![0.0f64; bins * height * width];
    let plane = height * width;
    let span = (bins - 1) as f64;
    for (i, e) in events.iter().enumerate() {
        let (x, y) = (usize::from(e.x), usize::from(e.y));
        ensure!(x < width && y < height, "event {i} at ({x}, {y}) outside {width}x{height}");
        let t = e.t as f64;
        ensure!(
            t >= window.start && t <= window.end,
            "event {i} at t={t} outside window [{}, {}]",
            window.start,
            window.end
        );
        let tn = span * (t - window.start) / window.len();
        let lower = tn.floor();
        let frac = tn - lower;
        let b0 = lower as usize;
        let p = if kind.is_reversed() { -e.p.value() } else { e.p.value() };
        let place = |b: usize| if kind.is_reversed() { bins - 1 - b } else { b };
        acc[place(b0) * plane + y * width + x] += p * (1.0 - frac);
        if frac > 0.0 {
            acc[place(b0 + 1) * plane + y * width + x] += p * frac;
        }
    }
    let data = Array3::from_shape_vec((bins, height, width), acc.into_iter().map(|v| v as f32).collect())
        .expect("shape matches allocation");
    Ok(VoxelGrid { data, kind, window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Polarity;

    fn ev(t: i64, x: u16, y: u16, p: Polarity) -> Event {
        Event { t, x, y, p }
    }

    fn window(a: f64, b: f64) -> TimeWindow {
        TimeWindow::new(a, b).unwrap()
    }

    #[test]
    fn empty_slice_gives_zero_grid() {
        let g = voxelize(&[], window(0.0, 10.0), 5, 4, 3, VoxelKind::Intra).unwrap();
        assert_eq!(g.data.dim(), (5, 3, 4));
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn event_at_window_start_lands_in_first_bin() {
        let g = voxelize(&[ev(100, 2, 1, Polarity::Positive)], window(100.0, 200.0), 5, 4, 3, VoxelKind::Intra)
            .unwrap();
        assert_eq!(g.data[[0, 1, 2]], 1.0);
        assert_eq!(g.sum(), 1.0);
    }

    #[test]
    fn event_at_37_percent_splits_between_bins_1_and_2() {
        let g = voxelize(&[ev(37, 0, 0, Polarity::Positive)], window(0.0, 100.0), 5, 1, 1, VoxelKind::Intra)
            .unwrap();
        assert!((g.data[[1, 0, 0]] - 0.52).abs() < 1e-6);
        assert!((g.data[[2, 0, 0]] - 0.48).abs() < 1e-6);
        assert_eq!(g.data[[0, 0, 0]], 0.0);
        assert_eq!(g.data[[3, 0, 0]], 0.0);
    }

    #[test]
    fn event_at_window_end_lands_in_last_bin() {
        let g = voxelize(&[ev(10, 0, 0, Polarity::Negative)], window(0.0, 10.0), 5, 1, 1, VoxelKind::Intra)
            .unwrap();
        assert_eq!(g.data[[4, 0, 0]], -1.0);
    }

    #[test]
    fn backward_is_mirrored_and_negated() {
        let evs = [ev(37, 0, 0, Polarity::Positive), ev(90, 0, 0, Polarity::Negative)];
        let f = voxelize(&evs, window(0.0, 100.0), 5, 1, 1, VoxelKind::InterForward).unwrap();
        let b = voxelize(&evs, window(0.0, 100.0), 5, 1, 1, VoxelKind::InterBackward).unwrap();
        assert_eq!(b.data, f.time_reversed().data);
        assert_eq!(b.time_reversed().data, f.data);
    }

    #[test]
    fn single_bin_collects_everything() {
        let evs = [ev(3, 0, 0, Polarity::Positive), ev(7, 0, 0, Polarity::Positive)];
        let g = voxelize(&evs, window(0.0, 10.0), 1, 1, 1, VoxelKind::Intra).unwrap();
        assert_eq!(g.data[[0, 0, 0]], 2.0);
    }

    #[test]
    fn rejects_degenerate_window_and_stray_events() {
        assert!(voxelize(&[], TimeWindow { start: 5.0, end: 5.0 }, 5, 1, 1, VoxelKind::Intra).is_err());
        assert!(voxelize(&[ev(11, 0, 0, Polarity::Positive)], window(0.0, 10.0), 5, 1, 1, VoxelKind::Intra).is_err());
        assert!(voxelize(&[ev(1, 1, 0, Polarity::Positive)], window(0.0, 10.0), 5, 1, 1, VoxelKind::Intra).is_err());
        assert!(voxelize(&[], window(0.0, 10.0), 0, 1, 1, VoxelKind::Intra).is_err());
    }
}
