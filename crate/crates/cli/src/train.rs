use std::fs;
use std::io::{LineWriter, Write};
use std::path::Path;

use evdvsr_model::checkpoint::Checkpoint;
use evdvsr_model::train::{LogRow, Trainer, LOG_HEADER};
use evdvsr_model::RunConfig;

use crate::data::{self, required_dir};
use crate::error::{io_err, Result};

pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const LATEST: &str = "latest.ckpt";

/// Drop log rows past `iteration` so a resumed run appends where its
/// checkpoint left off.
fn truncate_log(path: &Path, iteration: u64) -> Result<()> {
    let text = fs::read_to_string(path).map_err(io_err(path.display()))?;
    let mut kept = format!("{LOG_HEADER}\n");
    for line in text.lines().skip(1) {
        match LogRow::parse(line) {
            Ok(r) if r.iter <= iteration => {
                kept.push_str(line);
                kept.push('\n');
            }
            _ => break,
        }
    }
    fs::write(path, kept).map_err(io_err(path.display()))
}

/// Train into `out`. With `resume`, continue from `out/latest.ckpt` when it
/// exists. `stop_at` ends the run early at that iteration.
pub fn run(cfg: &RunConfig, out: &Path, resume: bool, stop_at: Option<u64>) -> Result<u64> {
    let root = required_dir(&cfg.train.data, "train.data")?;
    let data: Vec<_> = data::load(&root, &cfg.model)?.into_iter().map(|(_, s)| s).collect();
    let val = if cfg.train.val_data.is_empty() {
        None
    } else {
        Some(data::load(Path::new(&cfg.train.val_data), &cfg.model)?.into_iter().map(|(_, s)| s).collect::<Vec<_>>())
    };
    fs::create_dir_all(out).map_err(io_err(out.display()))?;
    let log_path = out.join(LOG_FILE);
    let latest = out.join(LATEST);
    let mut trainer = if resume && latest.exists() {
        let ck = Checkpoint::load(&latest)?;
        if log_path.exists() {
            truncate_log(&log_path, ck.iteration)?;
        }
        Trainer::resume(&ck, cfg)?
    } else {
        Trainer::new(cfg)?
    };
    let config_path = out.join(CONFIG_FILE);
    fs::write(&config_path, cfg.render()).map_err(io_err(config_path.display()))?;
    let file = if trainer.iteration > 0 {
        fs::OpenOptions::new().append(true).open(&log_path)
    } else {
        fs::File::create(&log_path)
    }
    .map_err(io_err(log_path.display()))?;
    let mut log = LineWriter::new(file);
    trainer.fit(&data, val.as_deref(), Some(out), &mut log, stop_at)?;
    log.flush().map_err(io_err(log_path.display()))?;
    Ok(trainer.iteration)
}
