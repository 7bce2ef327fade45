use super::{Event, EventStream, ExposureWindow, TimeWindow};
use crate::error::{ensure, Result};

/// A borrowed run of events together with the interval it was cut from.
#[derive(Debug, Clone, Copy)]
pub struct EventSlice<'a> {
    pub events: &'a [Event],
    pub window: TimeWindow,
}

/// Intra-frame slices (one per exposure) and inter-frame slices (one per
/// consecutive exposure pair).
#[derive(Debug, Clone)]
pub struct Segments<'a> {
    pub intra: Vec<EventSlice<'a>>,
    pub inter: Vec<EventSlice<'a>>,
}

fn check_exposures(exposures: &[ExposureWindow]) -> Result<()> {
    ensure!(!exposures.is_empty(), "no exposure windows");
    for (i, e) in exposures.iter().enumerate() {
        ensure!(e.t_start < e.t_end, "exposure {i} has no positive length");
    }
    for (i, pair) in exposures.windows(2).enumerate() {
        ensure!(
            pair[0].t_end < pair[1].t_start,
            "exposures {i} and {} overlap or are out of order",
            i + 1
        );
    }
    Ok(())
}

/// Split a stream into intra slices `t_start ≤ t ≤ t_end` and inter slices
/// `mid(T_{k-1}) < t ≤ mid(T_k)`.
pub fn segment_events<'a>(stream: &'a EventStream, exposures: &[ExposureWindow]) -> Result<Segments<'a>> {
    check_exposures(exposures)?;
    let events = stream.events();
    // first index with predicate false
    let lower = |pred: &dyn Fn(&Event) -> bool| events.partition_point(|e| pred(e));

    let intra = exposures
        .iter()
        .map(|ex| {
            let a = lower(&|e| e.t < ex.t_start);
            let b = lower(&|e| e.t <= ex.t_end);
            EventSlice {
                events: &events[a..b],
                window: ex.window(),
            }
        })
        .collect();

    let inter = exposures
        .windows(2)
        .map(|pair| {
            let (m0, m1) = (pair[0].midpoint_x2(), pair[1].midpoint_x2());
            let a = lower(&|e| 2 * e.t <= m0);
            let b = lower(&|e| 2 * e.t <= m1);
            EventSlice {
                events: &events[a..b],
                window: TimeWindow {
                    start: pair[0].midpoint(),
                    end: pair[1].midpoint(),
                },
            }
        })
        .collect();

    Ok(Segments { intra, inter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Polarity;

    fn stream(ts: &[i64], t_max: i64) -> EventStream {
        let events = ts
            .iter()
            .map(|&t| Event {
                t,
                x: 0,
                y: 0,
                p: Polarity::Positive,
            })
            .collect();
        EventStream::new(events, 1, 1, 0, t_max).unwrap()
    }

    fn exp(i: usize, a: i64, b: i64) -> ExposureWindow {
        ExposureWindow::new(i, a, b).unwrap()
    }

    #[test]
    fn events_outside_every_interval_leave_slices_empty() {
        let s = stream(&[0, 1, 2, 300], 300);
        let seg = segment_events(&s, &[exp(0, 10, 20), exp(1, 30, 40)]).unwrap();
        // inter interval is (15, 35]
        assert!(seg.intra.iter().all(|sl| sl.events.is_empty()));
        assert!(seg.inter.iter().all(|sl| sl.events.is_empty()));
    }

    #[test]
    fn midpoint_event_boundary_convention() {
        // exposures [0,10], [20,30], [40,50]; midpoints 5, 25, 45
        let exps = [exp(0, 0, 10), exp(1, 20, 30), exp(2, 40, 50)];
        let s = stream(&[25], 60);
        let seg = segment_events(&s, &exps).unwrap();
        assert_eq!(seg.intra[1].events.len(), 1);
        assert_eq!(seg.intra[0].events.len() + seg.intra[2].events.len(), 0);
        // right boundary of 0->1, excluded from 1->2
        assert_eq!(seg.inter[0].events.len(), 1);
        assert_eq!(seg.inter[1].events.len(), 0);
        assert_eq!(seg.inter[0].window.end, 25.0);
        assert_eq!(seg.inter[1].window.start, 25.0);
    }

    #[test]
    fn half_microsecond_midpoints() {
        // midpoints 5.5 and 25.5
        let exps = [exp(0, 0, 11), exp(1, 20, 31)];
        let s = stream(&[5, 6, 25, 26], 40);
        let seg = segment_events(&s, &exps).unwrap();
        let ts: Vec<i64> = seg.inter[0].events.iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![6, 25]);
    }

    #[test]
    fn rejects_overlapping_or_unordered_exposures() {
        let s = stream(&[], 100);
        assert!(segment_events(&s, &[exp(0, 0, 10), exp(1, 10, 20)]).is_err());
        assert!(segment_events(&s, &[exp(0, 20, 30), exp(1, 0, 10)]).is_err());
        assert!(segment_events(&s, &[]).is_err());
    }

    #[test]
    fn uniform_events_split_proportionally() {
        // one event per microsecond over [0, 1000]; exposures [100, 300], [600, 900]
        let ts: Vec<i64> = (0..=1000).collect();
        let s = stream(&ts, 1000);
        let seg = segment_events(&s, &[exp(0, 100, 300), exp(1, 600, 900)]).unwrap();
        // closed intervals hold length + 1 integer stamps
        assert!((seg.intra[0].events.len() as i64 - 200).abs() <= 1);
        assert!((seg.intra[1].events.len() as i64 - 300).abs() <= 1);
        // (200, 750]
        assert!((seg.inter[0].events.len() as i64 - 550).abs() <= 1);
    }
}
