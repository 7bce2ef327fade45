use std::path::Path;

use evdvsr_model::selfcheck::{run_all, CheckLine, Faults};

use crate::error::{io_err, CliError, Result};

pub const REPORT_FILE: &str = "selfcheck.txt";

pub fn faults(names: &[String]) -> Result<Faults> {
    let mut f = Faults::default();
    for n in names {
        let one = Faults::parse(n).ok_or_else(|| CliError::Usage(format!("unknown fault {n:?} (known: dcn-clamp)")))?;
        f.dcn_clamp |= one.dcn_clamp;
    }
    Ok(f)
}

/// Run every registered property, print one line each, and fail if any
/// property fails.
pub fn run(fault_names: &[String], out: Option<&Path>) -> Result<Vec<CheckLine>> {
    let lines = run_all(faults(fault_names)?);
    let mut text = String::new();
    for l in &lines {
        let r = l.render();
        println!("{r}");
        text.push_str(&r);
        text.push('\n');
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir.display()))?;
        let p = dir.join(REPORT_FILE);
        std::fs::write(&p, &text).map_err(io_err(p.display()))?;
    }
    let failed = lines.iter().filter(|l| !l.passed()).count();
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} properties failed", lines.len())));
    }
    Ok(lines)
}
