//! Run configuration: built-in defaults, overlaid by a flat key-value file,
//! overlaid by command-line overrides. Keys are `section.field`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RfdOrder {
    /// Frame features enhance events, then events deblur frames.
    #[serde(rename = "ie-ei")]
    IeThenEi,
    #[serde(rename = "ei-ie")]
    EiThenIe,
    /// Skip the event-enhancement step entirely.
    #[serde(rename = "ei-only")]
    EiOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub channels: usize,
    pub residual_blocks: usize,
    pub heads: usize,
    pub bins: usize,
    pub scale: usize,
    pub dcn_groups: usize,
    /// Bound on the learned offset residual, in LR pixels.
    pub dcn_offset_clamp: f64,
    /// Initial bias of the modulation-mask logits.
    pub dcn_mask_bias: f64,
    pub rfd_order: RfdOrder,
    pub use_intra: bool,
    pub use_inter: bool,
    pub use_ega: bool,
    pub use_fga: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 32,
            residual_blocks: 5,
            heads: 4,
            bins: 5,
            scale: 4,
            dcn_groups: 4,
            dcn_offset_clamp: 10.0,
            dcn_mask_bias: 0.0,
            rfd_order: RfdOrder::IeThenEi,
            use_intra: true,
            use_inter: true,
            use_ega: true,
            use_fga: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.channels == 0 || self.heads == 0 || self.dcn_groups == 0 || self.bins == 0 {
            return bad("channels, heads, dcn_groups and bins must be positive".into());
        }
        if self.channels % self.heads != 0 || self.channels % self.dcn_groups != 0 {
            return bad(format!(
                "channels {} not divisible by heads {} and dcn_groups {}",
                self.channels, self.heads, self.dcn_groups
            ));
        }
        if !matches!(self.scale, 2 | 4) {
            return bad(format!("scale must be 2 or 4, got {}", self.scale));
        }
        if !(self.dcn_offset_clamp > 0.0) {
            return bad("dcn_offset_clamp must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Dataset root written by `simulate`.
    pub data: String,
    pub clip_length: usize,
    pub crop_size: usize,
    pub center_crop: bool,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_min: f64,
    pub total_iters: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub flip_prob_h: f64,
    pub flip_prob_v: f64,
    pub seed: u64,
    pub eta: f64,
    pub use_lr: bool,
    pub use_le: bool,
    pub checkpoint_every: u64,
    /// Held-out PSNR every N iterations on `val_data` (0 disables).
    pub val_every: u64,
    pub val_data: String,
    /// Write real wall-clock milliseconds into the log; when false the
    /// column is 0 and logs are byte-reproducible.
    pub log_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            data: String::new(),
            clip_length: 15,
            crop_size: 64,
            center_crop: false,
            batch_size: 8,
            base_lr: 1e-4,
            lr_min: 1e-7,
            total_iters: 20_000,
            beta1: 0.9,
            beta2: 0.99,
            adam_eps: 1e-8,
            flip_prob_h: 0.5,
            flip_prob_v: 0.5,
            seed: 0,
            eta: 1e-8,
            use_lr: true,
            use_le: true,
            checkpoint_every: 1000,
            val_every: 0,
            val_data: String::new(),
            log_wall_clock: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.crop_size == 0 || self.crop_size % 4 != 0 {
            return bad("crop_size must be a positive multiple of 4");
        }
        if self.clip_length < 2 {
            return bad("clip_length must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.flip_prob_h) || !(0.0..=1.0).contains(&self.flip_prob_v) {
            return bad("flip probabilities must be in [0, 1]");
        }
        if !self.use_lr && !self.use_le {
            return bad("at least one of use_lr, use_le must be enabled");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Directory of sharp source clips (one sub-directory of PNGs each);
    /// ignored when `synthetic` is set.
    pub source: String,
    pub synthetic: bool,
    pub clips: usize,
    /// Blurry frames per clip.
    pub frames: usize,
    pub hr_height: usize,
    pub hr_width: usize,
    pub min_frames_per_exposure: usize,
    pub max_frames_per_exposure: usize,
    pub gap_frames: usize,
    pub min_speed: f64,
    pub max_speed: f64,
    pub objects: usize,
    /// Sharp frames per exposure for image-sequence sources.
    pub exposure_frames: usize,
    pub theta: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            source: String::new(),
            synthetic: false,
            clips: 2,
            frames: 10,
            hr_height: 256,
            hr_width: 256,
            min_frames_per_exposure: 8,
            max_frames_per_exposure: 24,
            gap_frames: 0,
            min_speed: 0.5,
            max_speed: 3.0,
            objects: 4,
            exposure_frames: 12,
            theta: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub data: String,
    pub checkpoint: String,
    /// LR tile edge; 0 runs whole frames.
    pub tile: usize,
    pub tile_overlap: usize,
    pub frame_weighted: bool,
    pub grids: bool,
    /// Score the ground truth against itself.
    pub gt_as_prediction: bool,
    /// Replace all events by an empty stream.
    pub zero_events: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            data: String::new(),
            checkpoint: String::new(),
            tile: 0,
            tile_overlap: 16,
            frame_weighted: false,
            grids: true,
            gt_as_prediction: false,
            zero_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub sim: SimConfig,
    pub eval: EvalConfig,
}

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v).expect("config serializes") {
        Value::Object(m) => m,
        _ => unreachable!("config structs serialize to objects"),
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_value(key: &str, current: &Value, raw: &str) -> Result<Value> {
    let bad = || Error::Config(format!("{key}: cannot parse {raw:?}"));
    Ok(match current {
        Value::Bool(_) => match raw {
            "true" | "1" => Value::Bool(true),
            "false" | "0" => Value::Bool(false),
            _ => return Err(bad()),
        },
        Value::Number(n) if n.is_u64() => Value::from(raw.parse::<u64>().map_err(|_| bad())?),
        Value::Number(_) => {
            let f = raw.parse::<f64>().map_err(|_| bad())?;
            serde_json::Number::from_f64(f).map(Value::Number).ok_or_else(bad)?
        }
        Value::String(_) => Value::String(raw.to_string()),
        _ => return Err(bad()),
    })
}

impl RunConfig {
    fn sections(&self) -> [(&'static str, Map<String, Value>); 4] {
        [
            ("model", to_map(&self.model)),
            ("train", to_map(&self.train)),
            ("sim", to_map(&self.sim)),
            ("eval", to_map(&self.eval)),
        ]
    }

    /// Every key with its current value, sorted.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for (section, map) in self.sections() {
            for (k, v) in map {
                out.insert(format!("{section}.{k}"), render_value(&v));
            }
        }
        out
    }

    /// Apply overrides on top of `self`. Unknown keys are an error.
    pub fn with_overrides<'a>(&self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut sections = self.sections();
        for (key, raw) in pairs {
            let (section, field) = key
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?;
            let map = sections
                .iter_mut()
                .find(|(s, _)| *s == section)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?;
            let current = map.get(field).ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?;
            let value = parse_value(key, current, raw)?;
            map.insert(field.to_string(), value);
        }
        let take = |i: usize, sections: &mut [(&str, Map<String, Value>); 4]| Value::Object(std::mem::take(&mut sections[i].1));
        let de = |e: serde_json::Error| Error::Config(e.to_string());
        let out = RunConfig {
            model: serde_json::from_value(take(0, &mut sections)).map_err(de)?,
            train: serde_json::from_value(take(1, &mut sections)).map_err(de)?,
            sim: serde_json::from_value(take(2, &mut sections)).map_err(de)?,
            eval: serde_json::from_value(take(3, &mut sections)).map_err(de)?,
        };
        Ok(out)
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        RunConfig::default().with_overrides(kv.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn render(&self) -> String {
        let kv = self.to_kv();
        evdvsr_core::kvconf::render(kv.iter().map(|(k, v)| (k.as_str(), v.clone())))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }
}

fn digest(pairs: impl IntoIterator<Item = (String, String)>) -> String {
    let mut h = Sha256::new();
    for (k, v) in pairs {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

impl ModelConfig {
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        to_map(self)
            .into_iter()
            .map(|(k, v)| (format!("model.{k}"), render_value(&v)))
            .collect()
    }

    /// SHA-256 over the canonical `model.*` rendering; checkpoints refuse to
    /// load into a differently shaped or differently toggled network.
    pub fn hash(&self) -> String {
        digest(self.to_kv())
    }
}

/// The ablation switches of a run, rendered `use_x=0|1` and joined by commas.
pub fn toggle_summary(cfg: &RunConfig) -> String {
    let b = |v: bool| if v { "1" } else { "0" };
    format!(
        "use_intra={},use_inter={},use_ega={},use_fga={},use_lr={},use_le={},rfd_order={}",
        b(cfg.model.use_intra),
        b(cfg.model.use_inter),
        b(cfg.model.use_ega),
        b(cfg.model.use_fga),
        b(cfg.train.use_lr),
        b(cfg.train.use_le),
        render_value(&serde_json::to_value(cfg.model.rfd_order).expect("enum serializes")),
    )
}

pub fn toggle_hash(cfg: &RunConfig) -> String {
    digest([("toggles".to_string(), toggle_summary(cfg))])[..12].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_kv() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
        let text = cfg.render();
        let parsed = evdvsr_core::kvconf::parse(&text).unwrap();
        assert_eq!(RunConfig::from_kv(&parsed).unwrap(), cfg);
    }

    #[test]
    fn overrides_parse_by_field_type() {
        let cfg = RunConfig::default()
            .with_overrides([
                ("model.use_ega", "false"),
                ("train.base_lr", "2e-4"),
                ("model.rfd_order", "ei-ie"),
                ("train.total_iters", "5"),
            ])
            .unwrap();
        assert!(!cfg.model.use_ega);
        assert_eq!(cfg.train.base_lr, 2e-4);
        assert_eq!(cfg.model.rfd_order, RfdOrder::EiThenIe);
        assert_eq!(cfg.train.total_iters, 5);
    }

    #[test]
    fn unknown_or_malformed_keys_fail() {
        let base = RunConfig::default();
        assert!(base.with_overrides([("model.nope", "1")]).is_err());
        assert!(base.with_overrides([("nosection", "1")]).is_err());
        assert!(base.with_overrides([("train.seed", "-1")]).is_err());
        assert!(base.with_overrides([("model.use_fga", "yes")]).is_err());
        assert!(base.with_overrides([("model.rfd_order", "sideways")]).is_err());
    }

    #[test]
    fn model_hash_tracks_toggles_only_in_model_section() {
        let a = RunConfig::default();
        let b = a.with_overrides([("model.use_ega", "false")]).unwrap();
        let c = a.with_overrides([("train.total_iters", "3")]).unwrap();
        assert_ne!(a.model.hash(), b.model.hash());
        assert_eq!(a.model.hash(), c.model.hash());
        assert_ne!(toggle_hash(&a), toggle_hash(&b));
    }

    #[test]
    fn validation_rejects_bad_geometry() {
        let mut m = ModelConfig::default();
        m.heads = 5;
        assert!(m.validate().is_err());
        m = ModelConfig { scale: 3, ..ModelConfig::default() };
        assert!(m.validate().is_err());
        let t = TrainConfig { crop_size: 30, ..TrainConfig::default() };
        assert!(t.validate().is_err());
    }
}
