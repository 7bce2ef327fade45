//! Event files.
//!
//! Binary layout (little endian): a 16-byte ASCII magic field holding
//! `"EVDV1\n"` padded with NUL bytes, `u16` width, `u16` height, `u64` t_min,
//! then packed 9-byte records `u32 t - t_min, u16 x, u16 y, i8 p`.
//!
//! The CSV form is `t,x,y,p` per line after a `# width=.. height=.. t_min=.. t_max=..`
//! comment carrying the stream geometry.

use std::io::{BufRead, Read, Write};

use super::{Event, EventStream, Polarity};
use crate::error::{Error, Result};

pub const EVENT_MAGIC: &[u8; 6] = b"EVDV1\n";
const MAGIC_FIELD: usize = 16;
const RECORD: usize = 9;

fn format_err(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "event file",
        detail: detail.into(),
    }
}

fn write_err(e: std::io::Error) -> Error {
    Error::io("<event writer>", e)
}

pub fn write_binary<W: Write>(stream: &EventStream, mut out: W) -> Result<()> {
    let mut header = [0u8; MAGIC_FIELD + 12];
    header[..EVENT_MAGIC.len()].copy_from_slice(EVENT_MAGIC);
    header[16..18].copy_from_slice(&stream.width().to_le_bytes());
    header[18..20].copy_from_slice(&stream.height().to_le_bytes());
    header[20..28].copy_from_slice(&(stream.t_min() as u64).to_le_bytes());
    out.write_all(&header).map_err(write_err)?;

    let mut buf = Vec::with_capacity(stream.len() * RECORD);
    for e in stream.events() {
        let dt = u32::try_from(e.t - stream.t_min())
            .map_err(|_| Error::invalid(format!("event time {} overflows the 32-bit offset", e.t)))?;
        buf.extend_from_slice(&dt.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.push(e.p.sign() as u8);
    }
    out.write_all(&buf).map_err(write_err)
}

/// Read a binary event file. `t_max` is restored as the last event time (or
/// `t_min` for an empty stream) since the format does not store it.
pub fn read_binary<R: Read>(mut input: R) -> Result<EventStream> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<event reader>", e))?;
    if bytes.len() < MAGIC_FIELD + 12 {
        return Err(format_err("truncated header"));
    }
    let (magic, rest) = bytes.split_at(MAGIC_FIELD);
    if &magic[..EVENT_MAGIC.len()] != EVENT_MAGIC || magic[EVENT_MAGIC.len()..].iter().any(|&b| b != 0) {
        return Err(format_err("bad magic"));
    }
    let width = u16::from_le_bytes([rest[0], rest[1]]);
    let height = u16::from_le_bytes([rest[2], rest[3]]);
    let t_min = u64::from_le_bytes(rest[4..12].try_into().unwrap()) as i64;
    let body = &rest[12..];
    if body.len() % RECORD != 0 {
        return Err(format_err(format!("body length {} is not a multiple of {RECORD}", body.len())));
    }
    let events = body
        .chunks_exact(RECORD)
        .enumerate()
        .map(|(i, r)| {
            let dt = u32::from_le_bytes(r[0..4].try_into().unwrap());
            let p = Polarity::from_sign(r[8] as i8)
                .ok_or_else(|| format_err(format!("record {i}: polarity byte {}", r[8] as i8)))?;
            Ok(Event {
                t: t_min + i64::from(dt),
                x: u16::from_le_bytes([r[4], r[5]]),
                y: u16::from_le_bytes([r[6], r[7]]),
                p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let t_max = events.last().map_or(t_min, |e| e.t);
    EventStream::new(events, width, height, t_min, t_max)
}

pub fn write_csv<W: Write>(stream: &EventStream, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# width={} height={} t_min={} t_max={}",
        stream.width(),
        stream.height(),
        stream.t_min(),
        stream.t_max()
    )
    .map_err(write_err)?;
    for e in stream.events() {
        writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p.sign()).map_err(write_err)?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<EventStream> {
    let mut geometry: Option<(u16, u16, i64, i64)> = None;
    let mut events = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<event reader>", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| format_err(format!("line {}: {what}: {line:?}", n + 1));
        if let Some(comment) = line.strip_prefix('#') {
            let mut fields = [None; 4];
            for kv in comment.split_whitespace() {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                let v: i64 = v.parse().map_err(|_| bad("non-integer header value"))?;
                let slot = match k {
                    "width" => 0,
                    "height" => 1,
                    "t_min" => 2,
                    "t_max" => 3,
                    _ => return Err(bad("unknown header key")),
                };
                fields[slot] = Some(v);
            }
            let [Some(w), Some(h), Some(a), Some(b)] = fields else {
                return Err(bad("incomplete header"));
            };
            let dim = |v: i64| u16::try_from(v).map_err(|_| bad("dimension out of range"));
            geometry = Some((dim(w)?, dim(h)?, a, b));
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(bad("expected t,x,y,p"));
        }
        let p: i8 = parts[3].parse().map_err(|_| bad("polarity"))?;
        events.push(Event {
            t: parts[0].parse().map_err(|_| bad("timestamp"))?,
            x: parts[1].parse().map_err(|_| bad("x"))?,
            y: parts[2].parse().map_err(|_| bad("y"))?,
            p: Polarity::from_sign(p).ok_or_else(|| bad("polarity must be -1 or +1"))?,
        });
    }
    let (w, h, t_min, t_max) = geometry.ok_or_else(|| format_err("missing geometry header"))?;
    EventStream::new(events, w, h, t_min, t_max)
}
