//! Aggregate tables and training curves from one or more run outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use evdvsr_core::frame::save_png;
use evdvsr_core::kvconf;
use evdvsr_core::metrics::{parse_metric_lines, MetricLine, AGGREGATE_LABEL};
use evdvsr_model::config::{toggle_hash, toggle_summary};
use evdvsr_model::train::{LogRow, LOG_HEADER, VAL_HEADER};
use evdvsr_model::RunConfig;
use serde_json::json;

use crate::error::{io_err, CliError, Result};
use crate::eval::METRICS_FILE;
use crate::plot::{self, Axes, Series};
use crate::train::{CONFIG_FILE, LOG_FILE};

pub const REPORT_FILE: &str = "report.txt";
pub const LOSS_PLOT: &str = "loss.png";
pub const PSNR_PLOT: &str = "psnr.png";
pub const PLOT_META: &str = "plot_meta.json";
pub const VAL_FILE: &str = "val.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ValRow {
    pub iter: u64,
    pub psnr: f64,
    pub bicubic: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Run {
    pub name: String,
    pub toggles: Option<String>,
    pub toggle_hash: Option<String>,
    pub metrics: Option<Vec<MetricLine>>,
    pub train: Option<Vec<LogRow>>,
    pub val: Option<Vec<ValRow>>,
}

impl Run {
    /// The `ALL` row, or the mean over clip rows when absent.
    pub fn summary(&self) -> Option<MetricLine> {
        let m = self.metrics.as_ref()?;
        if let Some(all) = m.iter().find(|l| l.clip == AGGREGATE_LABEL) {
            return Some(all.clone());
        }
        if m.is_empty() {
            return None;
        }
        let n = m.len() as f64;
        let mean = |f: fn(&MetricLine) -> f64| m.iter().map(f).sum::<f64>() / n;
        Some(MetricLine {
            clip: AGGREGATE_LABEL.into(),
            psnr: mean(|l| l.psnr),
            ssim: mean(|l| l.ssim),
            tof: mean(|l| l.tof),
            tcc: mean(|l| l.tcc),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub runs: Vec<Run>,
    pub text: String,
    pub loss_axes: Option<Axes>,
    pub psnr_axes: Option<Axes>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path.display()))
}

fn malformed(path: &Path, line: usize, text: &str) -> CliError {
    CliError::Data(format!("malformed log {} line {line}: {text:?}", path.display()))
}

fn first_line(text: &str) -> &str {
    text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or("")
}

fn comment_headers(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn parse_train_log(path: &Path, text: &str) -> Result<Vec<LogRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l == LOG_HEADER {
            continue;
        }
        rows.push(LogRow::parse(l).map_err(|_| malformed(path, i + 1, l))?);
    }
    Ok(rows)
}

pub fn parse_val_log(path: &Path, text: &str) -> Result<Vec<ValRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l == VAL_HEADER {
            continue;
        }
        let p: Vec<&str> = l.split(',').map(str::trim).collect();
        let bad = || malformed(path, i + 1, l);
        if p.len() != 3 {
            return Err(bad());
        }
        rows.push(ValRow {
            iter: p[0].parse().map_err(|_| bad())?,
            psnr: p[1].parse().map_err(|_| bad())?,
            bicubic: p[2].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

fn parse_metrics(path: &Path, text: &str, run: &mut Run) -> Result<()> {
    let lines = parse_metric_lines(text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let h = comment_headers(text);
    run.toggles = h.get("toggles").cloned().or(run.toggles.take());
    run.toggle_hash = h.get("toggle_hash").cloned().or(run.toggle_hash.take());
    run.metrics = Some(lines);
    Ok(())
}

fn load_file(path: &Path, run: &mut Run) -> Result<()> {
    let text = read(path)?;
    let head = first_line(&text);
    if head == LOG_HEADER {
        run.train = Some(parse_train_log(path, &text)?);
    } else if head == VAL_HEADER {
        run.val = Some(parse_val_log(path, &text)?);
    } else {
        parse_metrics(path, &text, run)?;
    }
    Ok(())
}

fn run_toggles(dir: &Path, run: &mut Run) -> Result<()> {
    let p = dir.join(CONFIG_FILE);
    if !p.exists() {
        return Ok(());
    }
    let kv = kvconf::parse(&read(&p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    let cfg = RunConfig::from_kv(&kv).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    run.toggles = Some(toggle_summary(&cfg));
    run.toggle_hash = Some(toggle_hash(&cfg));
    Ok(())
}

pub fn load_run(path: &Path) -> Result<Run> {
    let mut run = Run::default();
    if path.is_dir() {
        run.name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string());
        run_toggles(path, &mut run)?;
        for f in [LOG_FILE, VAL_FILE, METRICS_FILE] {
            let p = path.join(f);
            if p.exists() {
                load_file(&p, &mut run)?;
            }
        }
    } else if path.is_file() {
        let parent = path.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned());
        let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        run.name = parent.map_or(file.clone(), |p| format!("{p}/{file}"));
        if let Some(dir) = path.parent() {
            run_toggles(dir, &mut run)?;
        }
        load_file(path, &mut run)?;
    } else {
        return Err(CliError::Data(format!("{} does not exist", path.display())));
    }
    if run.metrics.is_none() && run.train.is_none() && run.val.is_none() {
        return Err(CliError::Data(format!("no metric or training log in {}", path.display())));
    }
    Ok(run)
}

fn runs_table(runs: &[Run]) -> String {
    let rows: Vec<(&Run, MetricLine)> = runs.iter().filter_map(|r| r.summary().map(|s| (r, s))).collect();
    let w = rows.iter().map(|(r, _)| r.name.len()).max().unwrap_or(3).max(3);
    let mut out = format!(
        "{:<w$}  {:<12}  {:>9}  {:>7}  {:>7}  {:>7}\n",
        "run", "toggles", "PSNR(dB)", "SSIM", "tOF", "TCC"
    );
    for (r, s) in rows {
        writeln!(
            out,
            "{:<w$}  {:<12}  {:>9.3}  {:>7.4}  {:>7.4}  {:>7.4}",
            r.name,
            r.toggle_hash.as_deref().unwrap_or("-"),
            s.psnr,
            s.ssim,
            s.tof,
            s.tcc
        )
        .unwrap();
    }
    out
}

/// One row per distinct toggle set, metrics averaged over its runs.
fn ablation_table(runs: &[Run]) -> String {
    let mut groups: BTreeMap<String, (String, Vec<MetricLine>)> = BTreeMap::new();
    for r in runs {
        if let Some(s) = r.summary() {
            let key = r.toggle_hash.clone().unwrap_or_else(|| "-".into());
            let e = groups.entry(key).or_insert_with(|| (r.toggles.clone().unwrap_or_default(), Vec::new()));
            e.1.push(s);
        }
    }
    let mean = |v: &[MetricLine], f: fn(&MetricLine) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    let best = groups.values().map(|(_, v)| mean(v, |l| l.psnr)).fold(f64::NEG_INFINITY, f64::max);
    let tw = groups.values().map(|(t, _)| t.len()).max().unwrap_or(7).max(7);
    let mut out = format!(
        "{:<12}  {:<tw$}  {:>4}  {:>9}  {:>7}  {:>7}  {:>7}  {:>8}\n",
        "toggle_hash", "toggles", "runs", "PSNR(dB)", "SSIM", "tOF", "TCC", "dPSNR"
    );
    for (hash, (toggles, v)) in &groups {
        let p = mean(v, |l| l.psnr);
        writeln!(
            out,
            "{:<12}  {:<tw$}  {:>4}  {:>9.3}  {:>7.4}  {:>7.4}  {:>7.4}  {:>8.3}",
            hash,
            toggles,
            v.len(),
            p,
            mean(v, |l| l.ssim),
            mean(v, |l| l.tof),
            mean(v, |l| l.tcc),
            p - best
        )
        .unwrap();
    }
    out
}

fn training_table(runs: &[Run]) -> String {
    let w = runs.iter().map(|r| r.name.len()).max().unwrap_or(3).max(3);
    let mut out = format!("{:<w$}  {:>8}  {:>8}  {:>12}  {:>10}\n", "run", "first", "last", "final_loss", "best_val");
    for r in runs {
        let Some(t) = r.train.as_ref().filter(|t| !t.is_empty()) else { continue };
        let best = r
            .val
            .as_ref()
            .and_then(|v| v.iter().map(|x| x.psnr).reduce(f64::max))
            .map_or("-".to_string(), |b| format!("{b:.3}"));
        writeln!(
            out,
            "{:<w$}  {:>8}  {:>8}  {:>12.6e}  {:>10}",
            r.name,
            t[0].iter,
            t[t.len() - 1].iter,
            t[t.len() - 1].loss.total,
            best
        )
        .unwrap();
    }
    out
}

fn meta(file: &str, axes: &Axes, series: &[Series]) -> serde_json::Value {
    json!({
        "file": file,
        "x_min": axes.x_min,
        "x_max": axes.x_max,
        "y_min": axes.y_min,
        "y_max": axes.y_max,
        "series": series.iter().map(|s| json!({"name": s.name, "points": s.points.len()})).collect::<Vec<_>>(),
    })
}

fn plot(out: &Path, file: &str, series: &[Series]) -> Result<Option<(Axes, serde_json::Value)>> {
    let Some((img, axes)) = plot::render(series) else { return Ok(None) };
    save_png(img.view(), &out.join(file))?;
    Ok(Some((axes, meta(file, &axes, series))))
}

pub fn run(inputs: &[PathBuf], out: &Path) -> Result<Report> {
    if inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one --input".into()));
    }
    let runs = inputs.iter().map(|p| load_run(p)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out).map_err(io_err(out.display()))?;
    let mut text = String::new();
    if runs.iter().any(|r| r.metrics.is_some()) {
        writeln!(text, "runs\n{}", runs_table(&runs)).unwrap();
        writeln!(text, "ablations by toggle set\n{}", ablation_table(&runs)).unwrap();
    }
    if runs.iter().any(|r| r.train.is_some()) {
        writeln!(text, "training\n{}", training_table(&runs)).unwrap();
    }
    let loss: Vec<Series> = runs
        .iter()
        .filter_map(|r| {
            r.train.as_ref().map(|t| Series {
                name: r.name.clone(),
                points: t.iter().map(|row| (row.iter as f64, row.loss.total)).collect(),
            })
        })
        .collect();
    let mut psnr = Vec::new();
    for r in &runs {
        if let Some(v) = &r.val {
            psnr.push(Series {
                name: r.name.clone(),
                points: v.iter().map(|x| (x.iter as f64, x.psnr)).collect(),
            });
            psnr.push(Series {
                name: format!("{} (bicubic)", r.name),
                points: v.iter().map(|x| (x.iter as f64, x.bicubic)).collect(),
            });
        }
    }
    let mut metas = serde_json::Map::new();
    let loss_axes = plot(out, LOSS_PLOT, &loss)?.map(|(a, m)| {
        metas.insert("loss".into(), m);
        a
    });
    let psnr_axes = plot(out, PSNR_PLOT, &psnr)?.map(|(a, m)| {
        metas.insert("psnr".into(), m);
        a
    });
    let meta_path = out.join(PLOT_META);
    let meta_text = serde_json::to_string_pretty(&serde_json::Value::Object(metas)).expect("json");
    fs::write(&meta_path, meta_text).map_err(io_err(meta_path.display()))?;
    let path = out.join(REPORT_FILE);
    fs::write(&path, &text).map_err(io_err(path.display()))?;
    print!("{text}");
    Ok(Report {
        runs,
        text,
        loss_axes,
        psnr_axes,
    })
}
