//! Single-file archive: magic line, little-endian header length, JSON
//! header, then raw little-endian tensor data in header order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{ensure, Error, Result};

pub const MAGIC: &[u8] = b"EVDVCKPT1\n";
pub const FORMAT_VERSION: &str = "evdvsr-checkpoint/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
    bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: String,
    config: BTreeMap<String, String>,
    model_hash: String,
    iteration: u64,
    rng_seed: u64,
    /// Decimal string; JSON numbers cannot carry 128 bits.
    rng_word_pos: String,
    adam_step: u64,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub iteration: u64,
    pub rng_seed: u64,
    pub rng_word_pos: u128,
    pub adam_step: u64,
    /// `param/<name>`, `adam_m/<name>`, `adam_v/<name>`.
    pub tensors: Vec<(String, Tensor)>,
}

fn dtype_name(d: DType) -> Result<&'static str> {
    match d {
        DType::F32 => Ok("f32"),
        DType::F64 => Ok("f64"),
        other => Err(Error::Checkpoint(format!("unsupported dtype {other:?}"))),
    }
}

fn tensor_bytes(t: &Tensor) -> Result<Vec<u8>> {
    let flat = t.flatten_all()?;
    Ok(match t.dtype() {
        DType::F32 => flat.to_vec1::<f32>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
        DType::F64 => flat.to_vec1::<f64>()?.iter().flat_map(|v| v.to_le_bytes()).collect(),
        other => return Err(Error::Checkpoint(format!("unsupported dtype {other:?}"))),
    })
}

fn tensor_from_bytes(e: &TensorEntry, raw: &[u8]) -> Result<Tensor> {
    let n: usize = e.shape.iter().product();
    let t = match e.dtype.as_str() {
        "f32" => {
            ensure_ck(raw.len() == n * 4, &e.name)?;
            let v: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
        }
        "f64" => {
            ensure_ck(raw.len() == n * 8, &e.name)?;
            let v: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            Tensor::from_vec(v, e.shape.as_slice(), &Device::Cpu)?
        }
        other => return Err(Error::Checkpoint(format!("tensor {}: unknown dtype {other}", e.name))),
    };
    Ok(t)
}

fn ensure_ck(ok: bool, name: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Checkpoint(format!("tensor {name}: byte length does not match its shape")))
    }
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut blob = Vec::new();
        for (name, t) in &self.tensors {
            let bytes = tensor_bytes(t)?;
            entries.push(TensorEntry {
                name: name.clone(),
                dtype: dtype_name(t.dtype())?.to_string(),
                shape: t.dims().to_vec(),
                offset: blob.len() as u64,
                bytes: bytes.len() as u64,
            });
            blob.extend_from_slice(&bytes);
        }
        let header = Header {
            format_version: FORMAT_VERSION.to_string(),
            config: self.config.to_kv(),
            model_hash: self.config.model.hash(),
            iteration: self.iteration,
            rng_seed: self.rng_seed,
            rng_word_pos: self.rng_word_pos.to_string(),
            adam_step: self.adam_step,
            tensors: entries,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut write = |b: &[u8]| f.write_all(b).map_err(|e| Error::io(&tmp, e));
        write(MAGIC)?;
        write(&(json.len() as u64).to_le_bytes())?;
        write(&json)?;
        write(&blob)?;
        drop(f);
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut all = Vec::new();
        f.read_to_end(&mut all).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
        if all.len() < MAGIC.len() + 8 || &all[..MAGIC.len()] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let len_at = MAGIC.len();
        let hlen = u64::from_le_bytes(all[len_at..len_at + 8].try_into().unwrap()) as usize;
        let body = len_at + 8;
        if all.len() < body + hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&all[body..body + hlen]).map_err(|e| bad(&e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format {}", header.format_version)));
        }
        let config = RunConfig::from_kv(&header.config)?;
        if config.model.hash() != header.model_hash {
            return Err(bad("model config hash mismatch"));
        }
        let data = &all[body + hlen..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            let (o, n) = (e.offset as usize, e.bytes as usize);
            if o + n > data.len() {
                return Err(bad(&format!("tensor {} runs past the end of the file", e.name)));
            }
            tensors.push((e.name.clone(), tensor_from_bytes(e, &data[o..o + n])?));
        }
        let rng_word_pos = header.rng_word_pos.parse().map_err(|_| bad("malformed rng_word_pos"))?;
        Ok(Checkpoint {
            config,
            iteration: header.iteration,
            rng_seed: header.rng_seed,
            rng_word_pos,
            adam_step: header.adam_step,
            tensors,
        })
    }

    /// Reject restoring into a network built from a different model config.
    pub fn verify_model(&self, expected: &crate::config::ModelConfig) -> Result<()> {
        ensure!(
            self.config.model.hash() == expected.hash(),
            "checkpoint model config {} does not match {}",
            self.config.model.hash(),
            expected.hash()
        );
        Ok(())
    }

    /// Tensors under `prefix/`, with the prefix stripped.
    /// Rebuild the stored network for inference.
    pub fn network(&self) -> Result<(crate::EvDeblurVsr, crate::ParamStore)> {
        let (net, store) = crate::EvDeblurVsr::new_frozen(&self.config.model, self.config.train.seed, DType::F32)?;
        store.load(&self.group("param"))?;
        Ok((net, store))
    }

    pub fn group(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let p = format!("{prefix}/");
        self.tensors
            .iter()
            .filter_map(|(n, t)| n.strip_prefix(&p).map(|s| (s.to_string(), t.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let a = Tensor::randn(0f32, 1f32, (2, 3), &Device::Cpu).unwrap();
        let b = Tensor::randn(0f64, 1f64, (4,), &Device::Cpu).unwrap();
        let ck = Checkpoint {
            config: RunConfig::default(),
            iteration: 7,
            rng_seed: 3,
            rng_word_pos: u128::MAX - 5,
            adam_step: 7,
            tensors: vec![("param/a".into(), a.clone()), ("adam_m/b".into(), b.clone())],
        };
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.iteration, 7);
        assert_eq!(back.rng_word_pos, u128::MAX - 5);
        assert_eq!(back.config, RunConfig::default());
        assert_eq!(back.tensors[0].1.to_vec2::<f32>().unwrap(), a.to_vec2::<f32>().unwrap());
        assert_eq!(back.tensors[1].1.to_vec1::<f64>().unwrap(), b.to_vec1::<f64>().unwrap());
        assert_eq!(back.group("param").len(), 1);
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"hello").unwrap();
        assert!(Checkpoint::load(&path).is_err());
        let ck = Checkpoint {
            config: RunConfig::default(),
            iteration: 0,
            rng_seed: 0,
            rng_word_pos: 0,
            adam_step: 0,
            tensors: vec![("param/a".into(), Tensor::zeros((8,), DType::F32, &Device::Cpu).unwrap())],
        };
        ck.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn model_mismatch_is_reported() {
        let ck = Checkpoint {
            config: RunConfig::default(),
            iteration: 0,
            rng_seed: 0,
            rng_word_pos: 0,
            adam_step: 0,
            tensors: vec![],
        };
        let mut other = RunConfig::default().model;
        other.use_ega = false;
        assert!(ck.verify_model(&other).is_err());
        assert!(ck.verify_model(&RunConfig::default().model).is_ok());
    }
}
