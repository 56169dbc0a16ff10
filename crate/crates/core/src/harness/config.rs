//! Experiment configuration.
//!
//! Files are TOML; any layout (sections or dotted keys) is accepted. The
//! canonical form is one `dotted.key = value` line per leaf, sorted by key. That
//! form is what gets snapshotted into run directories and hashed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::augment::MixConfig;
use crate::data::{self, Dataset, IngestOptions, Preprocess, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::model::{Architecture, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    #[default]
    Synthetic,
    Folder,
    Manifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub synthetic: SyntheticSpec,
    /// Dataset root (`folder`) or manifest file (`manifest`).
    pub path: String,
    pub resize: usize,
    /// Crop side for folder datasets; 0 disables cropping.
    pub crop: usize,
    pub flip: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: DataKind::Synthetic,
            synthetic: SyntheticSpec::default(),
            path: String::new(),
            resize: 512,
            crop: 448,
            flip: true,
        }
    }
}

impl DataConfig {
    pub fn preprocess(&self) -> Preprocess {
        let crop = match self.kind {
            DataKind::Folder if self.crop > 0 => Some(self.crop),
            _ => None,
        };
        Preprocess {
            crop,
            flip: self.flip,
        }
    }

    /// Loads (or generates) the dataset. Skipped files are logged.
    pub fn load(&self) -> Result<Dataset> {
        match self.kind {
            DataKind::Synthetic => data::generate(&self.synthetic),
            DataKind::Folder => {
                let opts = IngestOptions {
                    resize: self.resize,
                    crop: if self.crop > 0 { self.crop } else { self.resize },
                    seed: self.synthetic.seed,
                    ..IngestOptions::default()
                };
                let (ds, report) = data::ingest_folder(Path::new(&self.path), &opts)?;
                if !report.skipped.is_empty() {
                    log::warn!("{} undecodable files skipped", report.skipped.len());
                }
                Ok(ds)
            }
            DataKind::Manifest => data::load_manifest(Path::new(&self.path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// 0-based epochs at which the learning rate is multiplied by 0.1.
    pub lr_decay_epochs: Vec<usize>,
    pub momentum: f64,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub eval_every: usize,
    /// Window for the "mean of the final k evaluations" metric.
    pub final_k: usize,
    pub mid_loss_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            lr: 0.01,
            lr_decay_epochs: vec![24, 48],
            momentum: 0.9,
            batch_size: 16,
            seeds: vec![0, 1, 2],
            eval_every: 1,
            final_k: 10,
            mid_loss_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub mix: MixConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        let bad = |m: String| Err(Error::Config(m));
        if t.epochs == 0 {
            return bad("train.epochs must be >= 1".into());
        }
        if t.seeds.is_empty() {
            return bad("train.seeds must not be empty".into());
        }
        if t.batch_size == 0 {
            return bad("train.batch_size must be >= 1".into());
        }
        if !(t.lr >= 0.0) || !t.lr.is_finite() {
            return bad(format!("train.lr must be finite and >= 0, got {}", t.lr));
        }
        if !(0.0..1.0).contains(&t.momentum) {
            return bad(format!("train.momentum must be in [0, 1), got {}", t.momentum));
        }
        if t.eval_every == 0 || t.final_k == 0 {
            return bad("train.eval_every and train.final_k must be >= 1".into());
        }
        self.mix
            .validate()
            .map_err(|e| Error::Config(format!("mix: {e}")))?;
        if self.data.kind == DataKind::Synthetic {
            self.data
                .synthetic
                .validate()
                .map_err(|e| Error::Config(format!("data.synthetic: {e}")))?;
        } else if self.data.path.is_empty() {
            return bad("data.path is required for folder and manifest datasets".into());
        }
        Ok(())
    }

    /// Parses TOML text, applies `key=value` overrides, fills defaults and validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let cfg: ExperimentConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Sorted `dotted.key = value` lines.
    pub fn canonical(&self) -> String {
        let value = Value::try_from(self).expect("config serializes to TOML");
        let mut leaves = BTreeMap::new();
        flatten("", &value, &mut leaves);
        let mut out = String::new();
        for (k, v) in leaves {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// First 16 hex digits of SHA-256 over [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Model architecture for a dataset of the given `(c, h, w)`.
    pub fn architecture(&self, dims: (usize, usize, usize), num_classes: usize) -> Architecture {
        let (h, w) = self.data.preprocess().output_dims(dims.1, dims.2);
        Architecture {
            input_channels: dims.0,
            input_height: h,
            input_width: w,
            num_classes,
            model: self.model.clone(),
        }
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut BTreeMap<String, String>) {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        leaf => {
            out.insert(prefix.to_string(), leaf.to_string());
        }
    }
}

/// Applies `dotted.key=value`. The value is read as a TOML literal when it parses
/// as one, otherwise as a bare string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::Strategy;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::parse(
            "[train]\nepochs = 3\n",
            &[
                "mix.strategy=cutmix".into(),
                "train.seeds=[4, 5]".into(),
                "mix.alpha = 2".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.mix.strategy, Strategy::Cutmix);
        assert_eq!(cfg.train.seeds, vec![4, 5]);
        assert_eq!(cfg.mix.alpha, 2.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("[train]\nepochz = 3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("epochz"), "{err}");
        let err = ExperimentConfig::parse("", &["mix.bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn canonical_round_trips_and_hash_is_stable() {
        let cfg = ExperimentConfig::parse("", &["mix.strategy=mixup".into()]).unwrap();
        let text = cfg.canonical();
        let back = ExperimentConfig::parse(&text, &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical(), text);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 16);
        let other = ExperimentConfig::parse("", &["mix.strategy=cutmix".into()]).unwrap();
        assert_ne!(other.hash(), cfg.hash());
        assert!(text.lines().all(|l| l.contains(" = ")));
    }

    #[test]
    fn validation_errors() {
        assert!(ExperimentConfig::parse("", &["train.epochs=0".into()]).is_err());
        assert!(ExperimentConfig::parse("", &["train.seeds=[]".into()]).is_err());
        assert!(ExperimentConfig::parse("", &["mix.switch_prob=1.5".into()]).is_err());
        assert!(ExperimentConfig::parse("", &["data.kind=folder".into()]).is_err());
        assert!(ExperimentConfig::parse("", &["nokey".into()]).is_err());
    }
}
