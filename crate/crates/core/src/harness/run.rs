use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::config::ExperimentConfig;
use super::report::{best, mean_final_k, EpochRecord, RunReport, RunStatus};
use crate::augment::{apply_mix, LabeledImage};
use crate::cam::spm_for;
use crate::data::{Dataset, Preprocess, Sample};
use crate::error::Result;
use crate::fsutil;
use crate::model::{lr_at_epoch, train_step, BatchId, Checkpoint, Classifier, LossWeights, RngState, Sgd};
use crate::rng::{from_seed, substream, substream_seed};

/// Everything a finished (or aborted) run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub checkpoint: Checkpoint,
}

impl RunOutcome {
    /// Writes the run artifacts into `dir`: `config.toml` (canonical form),
    /// `epochs.csv`, `summary.json` and `checkpoint.json`, each atomically.
    pub fn persist(&self, dir: &Path, config: &ExperimentConfig) -> Result<()> {
        fsutil::write_atomic(&dir.join(CONFIG_SNAPSHOT), config.canonical().as_bytes())?;
        self.report.persist(dir)?;
        self.checkpoint.save(&dir.join(CHECKPOINT_FILE))
    }
}

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Directory name used for one seed of a configuration, e.g. `3f2a9c01d4e5b6a7-seed0`.
pub fn run_dir_name(config_hash: &str, seed: u64) -> String {
    format!("{config_hash}-seed{seed}")
}

/// Accuracy in percent over `samples` using evaluation preprocessing.
pub fn evaluate(model: &Classifier, samples: &[Sample], preprocess: &Preprocess) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in samples {
        let view = preprocess.eval_view(&s.image)?;
        if model.predict(&view)? == s.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

/// Loads the dataset and runs one seed.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let dataset = config.data.load()?;
    run_on_dataset(config, &dataset, seed)
}

/// Trains from scratch on `dataset` with one seed.
///
/// Randomness comes from named substreams of `seed`: `init` for weights,
/// `data/<epoch>` for ordering and crops, and one `boxes/<epoch,batch>` stream
/// per batch for the mixing draws. Numerical divergence (non-finite loss,
/// gradients, parameters or activations) stops training and the
/// report comes back flagged `failed` with the epochs completed so far.
pub fn run_on_dataset(config: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let t = &config.train;
    let preprocess = config.data.preprocess();
    let arch = config.architecture(dataset.image_dims()?, dataset.num_classes());
    let mut model = Classifier::new(arch, &mut substream(seed, "init", 0))?;
    let mut opt = Sgd::new(&model, t.momentum);
    let weights = LossWeights {
        main: 1.0,
        mid: t.mid_loss_weight,
    };
    let mut epochs = Vec::with_capacity(t.epochs);
    let mut failure = None;

    'epochs: for epoch in 0..t.epochs {
        let lr = lr_at_epoch(t.lr, &t.lr_decay_epochs, epoch);
        let mut data_rng = substream(seed, "data", epoch as u64);
        let mut order: Vec<usize> = (0..dataset.train.len()).collect();
        order.shuffle(&mut data_rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, chunk) in order.chunks(t.batch_size).enumerate() {
            let views = chunk
                .iter()
                .map(|&i| {
                    let s = &dataset.train[i];
                    Ok(LabeledImage {
                        image: preprocess.train_view(&s.image, &mut data_rng)?,
                        label: s.label,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let batch_seed = substream_seed(seed, "boxes", ((epoch as u64) << 32) | b as u64);
            let id = BatchId {
                epoch,
                index: b,
                seed: batch_seed,
            };
            let step = {
                let model_ref = &model;
                let mut provider = |i: usize| spm_for(model_ref, &views[i].image, views[i].label);
                apply_mix(&views, &mut provider, &config.mix, &mut from_seed(batch_seed))
            }
            .and_then(|mixed| train_step(&mut model, &mut opt, &mixed.samples, lr, weights, id));
            match step {
                Ok(out) => {
                    loss_sum += out.loss * chunk.len() as f64;
                    seen += chunk.len();
                }
                Err(e) if e.is_divergence() => {
                    log::error!("seed {seed}: {e}");
                    failure = Some(format!("epoch {}, batch {b}: {e}", epoch + 1));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let last = epoch + 1 == t.epochs;
        let test_acc = if (epoch + 1) % t.eval_every == 0 || last {
            match evaluate(&model, &dataset.test, &preprocess) {
                Ok(acc) => Some(acc),
                Err(e) if e.is_divergence() => {
                    log::error!("seed {seed}: {e}");
                    failure = Some(format!("evaluation after epoch {}: {e}", epoch + 1));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        log::debug!(
            "seed {seed} epoch {} lr {lr} loss {:.4} acc {:?}",
            epoch + 1,
            loss_sum / seen.max(1) as f64,
            test_acc
        );
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            lr,
            train_loss: loss_sum / seen.max(1) as f64,
            test_acc,
        });
    }

    let report = RunReport {
        config_hash: config.hash(),
        seed,
        status: if failure.is_some() {
            RunStatus::Failed
        } else {
            RunStatus::Completed
        },
        failure,
        best_acc: best(&epochs),
        mean_final_k_acc: mean_final_k(&epochs, t.final_k),
        final_k: t.final_k,
        wall_time_secs: started.elapsed().as_secs_f64(),
        epochs,
    };
    let checkpoint = Checkpoint {
        epoch: report.epochs.len(),
        rng: RngState {
            seed,
            next_epoch: report.epochs.len(),
        },
        model,
        optimizer: Some(opt),
    };
    Ok(RunOutcome { report, checkpoint })
}
