//! Ideal contrast-threshold event generation: each pixel keeps a reference
//! log level and fires one event every time the log intensity moves a full
//! threshold away from it. No noise, no refractory period.

use ndarray::{Array2, ArrayView2};

use super::{Event, EventStream, Polarity};
use crate::error::{ensure, Result};

/// Offset added before taking the log so black pixels stay finite.
pub const LOG_EPS: f64 = 1e-3;

pub struct EventSimulator {
    theta: f64,
    width: u16,
    height: u16,
    reference: Vec<f64>,
    previous: Vec<f64>,
    t_prev: Option<i64>,
    t_first: i64,
}

impl EventSimulator {
    pub fn new(width: u16, height: u16, theta: f64) -> Result<Self> {
        ensure!(theta > 0.0 && theta.is_finite(), "contrast threshold must be positive, got {theta}");
        let n = usize::from(width) * usize::from(height);
        Ok(EventSimulator {
            theta,
            width,
            height,
            reference: vec![0.0; n],
            previous: vec![0.0; n],
            t_prev: None,
            t_first: 0,
        })
    }

    pub fn push_frame(&mut self, frame: ArrayView2<f32>, t: i64, out: &mut Vec<Event>) -> Result<()> {
        let log = frame.mapv(|v| (f64::from(v) + LOG_EPS).ln());
        self.push_log_frame(log.view(), t, out)
    }

    /// Advance to a new log-intensity frame at time `t`, appending the
    /// generated events (sorted by time) to `out`.
    pub fn push_log_frame(&mut self, log: ArrayView2<f64>, t: i64, out: &mut Vec<Event>) -> Result<()> {
        ensure!(
            log.dim() == (usize::from(self.height), usize::from(self.width)),
            "frame shape {:?} does not match simulator {}x{}",
            log.dim(),
            self.height,
            self.width
        );
        let Some(t0) = self.t_prev else {
            for (dst, v) in self.reference.iter_mut().zip(log.iter()) {
                *dst = *v;
            }
            self.previous.copy_from_slice(&self.reference);
            self.t_prev = Some(t);
            self.t_first = t;
            return Ok(());
        };
        ensure!(t > t0, "frame timestamps must increase ({t0} then {t})");
        let dt = (t - t0) as f64;
        let start = out.len();
        let w = usize::from(self.width);
        for (i, &l1) in log.iter().enumerate() {
            let l0 = self.previous[i];
            let r = &mut self.reference[i];
            let (x, y) = ((i % w) as u16, (i / w) as u16);
            let mut emit = |level: f64, p: Polarity| {
                let frac = (level - l0) / (l1 - l0);
                let te = t0 + (frac * dt).round() as i64;
                out.push(Event { t: te.clamp(t0, t), x, y, p });
            };
            if l1 > l0 {
                while l1 - *r >= self.theta {
                    *r += self.theta;
                    emit(*r, Polarity::Positive);
                }
            } else if l1 < l0 {
                while *r - l1 >= self.theta {
                    *r -= self.theta;
                    emit(*r, Polarity::Negative);
                }
            }
            self.previous[i] = l1;
        }
        // Stable, so per-pixel crossing order survives equal timestamps.
        out[start..].sort_by_key(|e| (e.t, e.y, e.x));
        self.t_prev = Some(t);
        Ok(())
    }

    pub fn t_first(&self) -> i64 {
        self.t_first
    }

    pub fn t_last(&self) -> Option<i64> {
        self.t_prev
    }
}

fn check_sequence(n_frames: usize, n_stamps: usize) -> Result<()> {
    ensure!(n_frames >= 2, "need at least 2 frames to simulate events, got {n_frames}");
    ensure!(
        n_frames == n_stamps,
        "{n_frames} frames but {n_stamps} timestamps"
    );
    Ok(())
}

fn dims(shape: (usize, usize)) -> Result<(u16, u16)> {
    let (h, w) = shape;
    let h = u16::try_from(h).map_err(|_| crate::Error::invalid("frame too tall"))?;
    let w = u16::try_from(w).map_err(|_| crate::Error::invalid("frame too wide"))?;
    Ok((w, h))
}

/// Simulate events from grayscale intensity frames in `[0, 1]`.
pub fn simulate_events(frames: &[Array2<f32>], timestamps: &[i64], theta: f64) -> Result<EventStream> {
    check_sequence(frames.len(), timestamps.len())?;
    let logs: Vec<Array2<f64>> = frames
        .iter()
        .map(|f| f.mapv(|v| (f64::from(v) + LOG_EPS).ln()))
        .collect();
    simulate_log_events(&logs, timestamps, theta)
}

/// Same as [`simulate_events`] but on precomputed log intensities.
pub fn simulate_log_events(log_frames: &[Array2<f64>], timestamps: &[i64], theta: f64) -> Result<EventStream> {
    check_sequence(log_frames.len(), timestamps.len())?;
    let (w, h) = dims(log_frames[0].dim())?;
    let mut sim = EventSimulator::new(w, h, theta)?;
    let mut events = Vec::new();
    for (f, &t) in log_frames.iter().zip(timestamps) {
        sim.push_log_frame(f.view(), t, &mut events)?;
    }
    EventStream::new(events, w, h, timestamps[0], timestamps[timestamps.len() - 1])
}
