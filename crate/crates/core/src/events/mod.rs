//! Event streams: simulation from intensity video, exposure-aware
//! segmentation, voxel-grid encoding and a compact binary file format.

mod io;
mod segment;
mod simulate;
mod voxel;

pub use io::{read_binary, read_csv, write_binary, write_csv, EVENT_MAGIC};
pub use segment::{segment_events, EventSlice, Segments};
pub use simulate::{simulate_events, simulate_log_events, EventSimulator, LOG_EPS};
pub use voxel::{voxelize, VoxelGrid, VoxelKind};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn from_sign(p: i8) -> Option<Self> {
        match p {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.sign())
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// A single brightness change at pixel `(x, y)`, timestamp in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: i64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

/// Time interval in microseconds. Inter-frame windows start at exposure
/// midpoints, which may fall on half microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        ensure!(
            start.is_finite() && end.is_finite() && end > start,
            "time window [{start}, {end}] has no positive length"
        );
        Ok(TimeWindow { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Exposure of blurry frame `frame_index`, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureWindow {
    pub frame_index: usize,
    pub t_start: i64,
    pub t_end: i64,
}

impl ExposureWindow {
    pub fn new(frame_index: usize, t_start: i64, t_end: i64) -> Result<Self> {
        ensure!(t_start < t_end, "exposure {frame_index}: t_start {t_start} >= t_end {t_end}");
        Ok(ExposureWindow {
            frame_index,
            t_start,
            t_end,
        })
    }

    /// Twice the midpoint, kept integral so boundary tests are exact.
    pub fn midpoint_x2(&self) -> i64 {
        self.t_start + self.t_end
    }

    pub fn midpoint(&self) -> f64 {
        self.midpoint_x2() as f64 / 2.0
    }

    pub fn window(&self) -> TimeWindow {
        TimeWindow {
            start: self.t_start as f64,
            end: self.t_end as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    width: u16,
    height: u16,
    t_min: i64,
    t_max: i64,
}

impl EventStream {
    /// Validates geometry and time ordering.
    pub fn new(events: Vec<Event>, width: u16, height: u16, t_min: i64, t_max: i64) -> Result<Self> {
        ensure!(t_min <= t_max, "t_min {t_min} > t_max {t_max}");
        let mut prev = t_min;
        for (i, e) in events.iter().enumerate() {
            ensure!(
                e.x < width && e.y < height,
                "event {i} at ({}, {}) outside {width}x{height}",
                e.x,
                e.y
            );
            ensure!(
                e.t >= prev && e.t <= t_max,
                "event {i} timestamp {} out of order or outside [{t_min}, {t_max}]",
                e.t
            );
            prev = e.t;
        }
        Ok(EventStream {
            events,
            width,
            height,
            t_min,
            t_max,
        })
    }

    pub fn empty(width: u16, height: u16, t_min: i64, t_max: i64) -> Self {
        EventStream {
            events: Vec::new(),
            width,
            height,
            t_min,
            t_max,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn t_min(&self) -> i64 {
        self.t_min
    }

    pub fn t_max(&self) -> i64 {
        self.t_max
    }

    pub fn polarity_sum(&self) -> i64 {
        self.events.iter().map(|e| i64::from(e.p.sign())).sum()
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        self.map_events(|e| Event { x: w - 1 - e.x, ..e })
    }

    pub fn flip_vertical(&self) -> Self {
        let h = self.height;
        self.map_events(|e| Event { y: h - 1 - e.y, ..e })
    }

    fn map_events(&self, f: impl Fn(Event) -> Event) -> Self {
        EventStream {
            events: self.events.iter().copied().map(f).collect(),
            ..self.clone()
        }
    }
}
