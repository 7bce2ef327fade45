use std::fmt::Write as _;

use super::quality::{psnr, ssim};
use super::temporal::{tcc, tof};
use crate::error::{ensure, Error, Result};
use crate::frame::Frame;

pub const AGGREGATE_LABEL: &str = "ALL";

#[derive(Debug, Clone, PartialEq)]
pub struct ClipMetrics {
    pub clip: String,
    pub frames: usize,
    /// Mean per-frame PSNR in dB.
    pub psnr: f64,
    /// At least one frame hit the PSNR cap.
    pub psnr_saturated: bool,
    pub ssim: f64,
    pub tof: f64,
    pub tcc: f64,
    /// Not computed; kept so reports line up with the usual table layout.
    pub lpips: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    PerClip,
    FrameWeighted,
}

pub fn evaluate_clip(name: &str, pred: &[Frame], gt: &[Frame]) -> Result<ClipMetrics> {
    ensure!(!pred.is_empty() && pred.len() == gt.len(), "clip {name}: {} vs {} frames", pred.len(), gt.len());
    let mut psnr_sum = 0.0;
    let mut ssim_sum = 0.0;
    let mut saturated = false;
    for (p, g) in pred.iter().zip(gt) {
        let v = psnr(p.view(), g.view())?;
        psnr_sum += v.db;
        saturated |= v.saturated;
        ssim_sum += ssim(p.view(), g.view())?;
    }
    let n = pred.len() as f64;
    let (tof, tcc) = if pred.len() >= 2 {
        (tof(pred, gt)?, tcc(pred, gt)?)
    } else {
        (0.0, 1.0)
    };
    Ok(ClipMetrics {
        clip: name.to_string(),
        frames: pred.len(),
        psnr: psnr_sum / n,
        psnr_saturated: saturated,
        ssim: ssim_sum / n,
        tof,
        tcc,
        lpips: None,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub clips: Vec<ClipMetrics>,
}

impl MetricReport {
    pub fn push(&mut self, m: ClipMetrics) {
        self.clips.push(m);
    }

    pub fn aggregate(&self, mode: Aggregation) -> Option<ClipMetrics> {
        if self.clips.is_empty() {
            return None;
        }
        let weight = |c: &ClipMetrics| match mode {
            Aggregation::PerClip => 1.0,
            Aggregation::FrameWeighted => c.frames as f64,
        };
        let total: f64 = self.clips.iter().map(weight).sum();
        let mean = |f: fn(&ClipMetrics) -> f64| self.clips.iter().map(|c| weight(c) * f(c)).sum::<f64>() / total;
        Some(ClipMetrics {
            clip: AGGREGATE_LABEL.to_string(),
            frames: self.clips.iter().map(|c| c.frames).sum(),
            psnr: mean(|c| c.psnr),
            psnr_saturated: self.clips.iter().any(|c| c.psnr_saturated),
            ssim: mean(|c| c.ssim),
            tof: mean(|c| c.tof),
            tcc: mean(|c| c.tcc),
            lpips: None,
        })
    }

    fn rows(&self, mode: Aggregation) -> Vec<ClipMetrics> {
        let mut rows = self.clips.clone();
        rows.extend(self.aggregate(mode));
        rows
    }

    /// Machine-readable `clip, psnr, ssim, tof, tcc` lines with an `ALL` row.
    pub fn to_lines(&self, mode: Aggregation) -> String {
        let mut out = String::from("clip, psnr, ssim, tof, tcc\n");
        for r in self.rows(mode) {
            writeln!(out, "{}, {:.6}, {:.6}, {:.6}, {:.6}", r.clip, r.psnr, r.ssim, r.tof, r.tcc).unwrap();
        }
        out
    }

    pub fn to_table(&self, mode: Aggregation) -> String {
        let rows = self.rows(mode);
        let width = rows.iter().map(|r| r.clip.len()).max().unwrap_or(4).max(4);
        let mut out = format!(
            "{:<width$}  {:>6}  {:>9}  {:>7}  {:>7}  {:>7}\n",
            "clip", "frames", "PSNR(dB)", "SSIM", "tOF", "TCC"
        );
        for r in rows {
            let flag = if r.psnr_saturated { "*" } else { " " };
            writeln!(
                out,
                "{:<width$}  {:>6}  {:>8.3}{flag}  {:>7.4}  {:>7.4}  {:>7.4}",
                r.clip, r.frames, r.psnr, r.ssim, r.tof, r.tcc
            )
            .unwrap();
        }
        out
    }
}

/// One parsed `clip, psnr, ssim, tof, tcc` row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricLine {
    pub clip: String,
    pub psnr: f64,
    pub ssim: f64,
    pub tof: f64,
    pub tcc: f64,
}

/// Parse the output of [`MetricReport::to_lines`]. `#` lines and the header
/// are skipped; anything else malformed names the offending line.
pub fn parse_metric_lines(text: &str) -> Result<Vec<MetricLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("clip,") {
            continue;
        }
        let bad = || Error::Format {
            what: "metric log",
            detail: format!("line {}: {line:?}", i + 1),
        };
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(MetricLine {
            clip: parts[0].to_string(),
            psnr: num(parts[1])?,
            ssim: num(parts[2])?,
            tof: num(parts[3])?,
            tcc: num(parts[4])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, frames: usize, psnr: f64) -> ClipMetrics {
        ClipMetrics {
            clip: name.into(),
            frames,
            psnr,
            psnr_saturated: false,
            ssim: 0.5,
            tof: 1.0,
            tcc: 0.9,
            lpips: None,
        }
    }

    #[test]
    fn aggregate_is_mean_of_clips_unless_weighted() {
        let mut r = MetricReport::default();
        r.push(row("a", 2, 30.0));
        r.push(row("b", 6, 20.0));
        assert_eq!(r.aggregate(Aggregation::PerClip).unwrap().psnr, 25.0);
        assert_eq!(r.aggregate(Aggregation::FrameWeighted).unwrap().psnr, 22.5);
    }

    #[test]
    fn lines_round_trip_through_parser() {
        let mut r = MetricReport::default();
        r.push(row("clip_a", 3, 28.125));
        let text = r.to_lines(Aggregation::PerClip);
        let parsed = parse_metric_lines(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[1].clip, AGGREGATE_LABEL);
        assert_eq!(parsed[0].psnr, 28.125);
        assert!(r.to_table(Aggregation::PerClip).contains("ALL"));
    }

    #[test]
    fn malformed_line_is_named() {
        let err = parse_metric_lines("clip, psnr, ssim, tof, tcc\na, 1, 2, x, 4\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
