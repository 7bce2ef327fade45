//! Restoration quality (PSNR, SSIM) and temporal consistency (tOF, TCC).

pub mod flow;
mod quality;
mod report;
mod temporal;

pub use quality::{
    gaussian_window, mse, psnr, ssim, ssim_plane, Psnr, PSNR_CAP_DB, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW,
};
pub use report::{
    evaluate_clip, parse_metric_lines, Aggregation, ClipMetrics, MetricLine, MetricReport, AGGREGATE_LABEL,
};
pub use temporal::{tcc, tof};
