use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Test accuracy in percent; absent on epochs without evaluation.
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub epochs: Vec<EpochRecord>,
    pub best_acc: f64,
    pub mean_final_k_acc: f64,
    pub final_k: usize,
    pub wall_time_secs: f64,
}

/// Schema of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub epochs_completed: usize,
    pub best_acc: f64,
    pub mean_final_k_acc: f64,
    pub final_k: usize,
    pub final_acc: Option<f64>,
    pub wall_time_secs: f64,
}

pub const EPOCH_CSV_HEADER: &str = "epoch,lr,train_loss,test_acc";

/// Mean of the last `k` recorded accuracies (all of them when fewer exist).
pub fn mean_final_k(epochs: &[EpochRecord], k: usize) -> f64 {
    let accs: Vec<f64> = epochs.iter().filter_map(|e| e.test_acc).collect();
    if accs.is_empty() {
        return 0.0;
    }
    let tail = &accs[accs.len().saturating_sub(k)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn best(epochs: &[EpochRecord]) -> f64 {
    epochs.iter().filter_map(|e| e.test_acc).fold(0.0, f64::max)
}

impl RunReport {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            status: self.status,
            failure: self.failure.clone(),
            epochs_completed: self.epochs.len(),
            best_acc: self.best_acc,
            mean_final_k_acc: self.mean_final_k_acc,
            final_k: self.final_k,
            final_acc: self.epochs.iter().rev().find_map(|e| e.test_acc),
            wall_time_secs: self.wall_time_secs,
        }
    }

    /// One row per epoch; floats use the shortest round-trip representation.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from(EPOCH_CSV_HEADER);
        out.push('\n');
        for e in &self.epochs {
            let acc = e.test_acc.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.lr, e.train_loss, acc);
        }
        out
    }

    /// Writes `epochs.csv` and `summary.json` into `dir` (each atomically).
    pub fn persist(&self, dir: &Path) -> Result<()> {
        fsutil::write_atomic(&dir.join("epochs.csv"), self.epochs_csv().as_bytes())?;
        let json = serde_json::to_vec_pretty(&self.summary())?;
        fsutil::write_atomic(&dir.join("summary.json"), &json)
    }
}

/// Parses an epoch CSV back into records.
pub fn parse_epochs_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(EPOCH_CSV_HEADER) {
        return Err(Error::invalid("epoch CSV header mismatch"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(Error::invalid(format!("bad epoch row `{l}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::invalid(format!("`{s}`: {e}")))
            };
            Ok(EpochRecord {
                epoch: f[0]
                    .parse()
                    .map_err(|e| Error::invalid(format!("`{}`: {e}", f[0])))?,
                lr: num(f[1])?,
                train_loss: num(f[2])?,
                test_acc: if f[3].is_empty() { None } else { Some(num(f[3])?) },
            })
        })
        .collect()
}
