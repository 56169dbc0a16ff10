//! Self-describing checkpoint container.
//!
//! JSON document with the architecture, epoch counter, rng state and every
//! named tensor. Tensor data is stored as base64 of little-endian `f64` bytes so
//! a save/load round trip is bit-exact.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{Architecture, Classifier, Parameters, Sgd};
use crate::error::{Error, Result};
use crate::fsutil;

pub const CHECKPOINT_FORMAT: &str = "snapmix-checkpoint/v1";

/// Per-epoch random streams are derived from `(seed, epoch)`, so this pair is the
/// complete rng state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub next_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Classifier,
    pub epoch: usize,
    pub rng: RngState,
    /// Momentum buffers, when saved from a training run.
    pub optimizer: Option<Sgd>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    data: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    architecture: Architecture,
    epoch: usize,
    rng: RngState,
    tensors: Vec<TensorRecord>,
    momentum: Option<f64>,
    momentum_tensors: Option<Vec<TensorRecord>>,
}

fn encode(params: &Parameters) -> Vec<TensorRecord> {
    params
        .tensors()
        .into_iter()
        .zip(params.shapes())
        .map(|((name, data), shape)| {
            let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
            TensorRecord {
                name,
                shape,
                dtype: "f64le".into(),
                data: B64.encode(bytes),
            }
        })
        .collect()
}

fn decode(arch: &Architecture, records: &[TensorRecord]) -> Result<Parameters> {
    let mut params = Parameters::zeros(arch);
    let shapes = params.shapes();
    let slots = params.tensors_mut();
    if slots.len() != records.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors for this architecture, found {}",
            slots.len(),
            records.len()
        )));
    }
    for (((name, slot), shape), rec) in slots.into_iter().zip(shapes).zip(records) {
        if rec.name != name {
            return Err(Error::Checkpoint(format!(
                "expected tensor `{name}`, found `{}`",
                rec.name
            )));
        }
        if rec.shape != shape {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` has shape {:?}, architecture needs {:?}",
                rec.shape, shape
            )));
        }
        if rec.dtype != "f64le" {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}`: unsupported dtype {}",
                rec.dtype
            )));
        }
        let bytes = B64
            .decode(&rec.data)
            .map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))?;
        if bytes.len() != slot.len() * 8 {
            return Err(Error::Checkpoint(format!("tensor `{name}`: wrong byte length")));
        }
        for (dst, chunk) in slot.iter_mut().zip(bytes.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
    }
    Ok(params)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let doc = Document {
            format: CHECKPOINT_FORMAT.into(),
            architecture: self.model.arch().clone(),
            epoch: self.epoch,
            rng: self.rng,
            tensors: encode(self.model.params()),
            momentum: self.optimizer.as_ref().map(|o| o.momentum),
            momentum_tensors: self.optimizer.as_ref().map(|o| encode(o.velocity())),
        };
        Ok(serde_json::to_vec_pretty(&doc)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let doc: Document = serde_json::from_slice(bytes)
            .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format `{}`", doc.format)));
        }
        let params = decode(&doc.architecture, &doc.tensors)?;
        let optimizer = match (doc.momentum, &doc.momentum_tensors) {
            (Some(mu), Some(recs)) => Some(Sgd::with_velocity(decode(&doc.architecture, recs)?, mu)),
            (None, None) => None,
            _ => {
                return Err(Error::Checkpoint(
                    "momentum and momentum_tensors must appear together".into(),
                ))
            }
        };
        Ok(Self {
            model: Classifier::from_parts(doc.architecture, params)?,
            epoch: doc.epoch,
            rng: doc.rng,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fsutil::read(path)?)
    }
}
