//! Layered run configuration: built-in defaults, then the config file, then
//! `EVDVSR_SEED`, then command-line overrides.

use std::path::Path;

use evdvsr_core::kvconf;
use evdvsr_model::RunConfig;

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "EVDVSR_SEED";

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Resolve the effective config. `env_seed` is the raw value of
/// `EVDVSR_SEED`, if set; `sets` are raw `key=value` strings applied in
/// order, followed by `extra` pairs from dedicated flags.
pub fn resolve(config: Option<&Path>, env_seed: Option<&str>, sets: &[String], extra: &[(&str, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let kv = kvconf::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        cfg = cfg
            .with_overrides(kv.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(raw) = env_seed {
        let seed: u64 = raw.trim().parse().map_err(|_| usage(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        let s = seed.to_string();
        cfg = cfg.with_overrides([("train.seed", s.as_str()), ("sim.seed", s.as_str())]).map_err(usage)?;
    }
    let mut pairs = Vec::with_capacity(sets.len() + extra.len());
    for s in sets {
        pairs.push(kvconf::parse_override(s).map_err(usage)?);
    }
    pairs.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    cfg = cfg.with_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).map_err(usage)?;
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}
