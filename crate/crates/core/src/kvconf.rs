//! Flat `key = value` configuration text: UTF-8, one pair per line, `#`
//! starts a comment, blank lines ignored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn bad(line: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        what: "config",
        detail: format!("line {line}: {}", detail.into()),
    }
}

/// Parse config text into an ordered map. Duplicate keys are an error.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = parse_pair(line).map_err(|d| bad(n, d))?;
        if out.insert(k.clone(), v).is_some() {
            return Err(bad(n, format!("duplicate key {k:?}")));
        }
    }
    Ok(out)
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key = value, got {s:?}"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || k.contains(char::is_whitespace) {
        return Err(format!("invalid key {k:?}"));
    }
    Ok((k.to_string(), v.to_string()))
}

/// Parse a command-line `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    parse_pair(s).map_err(|d| Error::Format {
        what: "override",
        detail: d,
    })
}

pub fn render<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}
