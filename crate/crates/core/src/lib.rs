//! Data-mixing augmentation with semantically proportional labels.
//!
//! * [`augment`]: Mixup, CutMix, CutOut and SnapMix image operators, plus the
//!   area-ratio and semantic-ratio label rules.
//! * [`cam`]: class activation maps and semantic percent maps.
//! * [`model`]: a small GAP-head CNN with mixed-label loss, SGD and checkpoints.
//! * [`data`]: synthetic benchmark with ground-truth cue masks, folder ingestion, manifests.
//! * [`harness`]: configured runs, ablation grid, alpha sweep and label-noise benchmark.

pub mod augment;
pub mod cam;
pub mod data;
pub mod error;
pub mod fsutil;
pub mod harness;
pub mod image;
pub mod model;
pub mod rng;

pub use augment::{LabelStrategy, MixConfig, MixResult, Strategy};
pub use cam::{ActivationStack, SemanticPercentMap};
pub use error::{Error, Result};
pub use image::{BoxRegion, Image};
pub use model::{Architecture, Classifier, ModelConfig};
