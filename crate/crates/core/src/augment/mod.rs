//! Image-mixing operators and label-weight strategies.
//!
//! Mixing geometry (`mixup`, `cutmix`, `cutout`, `snapmix_image`) is kept apart
//! from label weighting (`area_ratio_labels`, `semantic_ratio_labels`) so any
//! mixing operator can be paired with either label rule.

mod batch;
mod labels;
mod ops;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BoxRegion, Image};

pub use batch::{apply_mix, LabeledImage, MixBatch, MixWarning, SpmProvider, UniformSpms};
pub use labels::{area_ratio_labels, semantic_ratio_labels};
pub use ops::{cutmix, cutout, mixup, sample_box, sample_lambda, snapmix, snapmix_image, transform_patch};

/// Which mixing operator to apply; `None` trains on clean samples only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    None,
    Mixup,
    Cutmix,
    Cutout,
    Snapmix,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Mixup => "mixup",
            Strategy::Cutmix => "cutmix",
            Strategy::Cutout => "cutout",
            Strategy::Snapmix => "snapmix",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "baseline" => Ok(Strategy::None),
            "mixup" => Ok(Strategy::Mixup),
            "cutmix" => Ok(Strategy::Cutmix),
            "cutout" => Ok(Strategy::Cutout),
            "snapmix" => Ok(Strategy::Snapmix),
            other => Err(Error::invalid(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelStrategy {
    #[default]
    AreaRatio,
    SemanticRatio,
}

impl LabelStrategy {
    pub fn name(self) -> &'static str {
        match self {
            LabelStrategy::AreaRatio => "area_ratio",
            LabelStrategy::SemanticRatio => "semantic_ratio",
        }
    }
}

/// Fields left out of a config file take the preset of the chosen strategy,
/// so `strategy = "mixup"` alone yields the MixUp reference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "MixConfigSpec")]
pub struct MixConfig {
    /// Beta(alpha, alpha) concentration.
    pub alpha: f64,
    /// Per-sample probability that the mix fires.
    pub switch_prob: f64,
    pub strategy: Strategy,
    pub label_strategy: LabelStrategy,
    /// Forces `box_b = box_a` for snapmix, recovering CutMix geometry.
    pub symmetric: bool,
    /// Fill value for cutout.
    pub fill: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixConfigSpec {
    alpha: Option<f64>,
    switch_prob: Option<f64>,
    strategy: Option<Strategy>,
    label_strategy: Option<LabelStrategy>,
    symmetric: Option<bool>,
    fill: Option<f64>,
}

impl From<MixConfigSpec> for MixConfig {
    fn from(spec: MixConfigSpec) -> Self {
        let preset = MixConfig::preset(spec.strategy.unwrap_or(Strategy::Snapmix));
        MixConfig {
            alpha: spec.alpha.unwrap_or(preset.alpha),
            switch_prob: spec.switch_prob.unwrap_or(preset.switch_prob),
            label_strategy: spec.label_strategy.unwrap_or(preset.label_strategy),
            symmetric: spec.symmetric.unwrap_or(preset.symmetric),
            fill: spec.fill.unwrap_or(preset.fill),
            strategy: preset.strategy,
        }
    }
}

impl Default for MixConfig {
    fn default() -> Self {
        Self::preset(Strategy::Snapmix)
    }
}

impl MixConfig {
    /// Reference hyperparameters for each strategy: MixUp alpha 1.0 / p 0.5,
    /// CutMix alpha 3.0 / p 1.0, CutOut p 0.5, SnapMix alpha 5.0 with semantic labels.
    pub fn preset(strategy: Strategy) -> Self {
        let (alpha, switch_prob, label_strategy) = match strategy {
            Strategy::None => (1.0, 0.0, LabelStrategy::AreaRatio),
            Strategy::Mixup => (1.0, 0.5, LabelStrategy::AreaRatio),
            Strategy::Cutmix => (3.0, 1.0, LabelStrategy::AreaRatio),
            Strategy::Cutout => (1.0, 0.5, LabelStrategy::AreaRatio),
            Strategy::Snapmix => (5.0, 1.0, LabelStrategy::SemanticRatio),
        };
        Self {
            alpha,
            switch_prob,
            strategy,
            label_strategy,
            symmetric: false,
            fill: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.switch_prob) {
            return Err(Error::invalid(format!(
                "switch_prob must be in [0, 1], got {}",
                self.switch_prob
            )));
        }
        if self.label_strategy == LabelStrategy::SemanticRatio
            && matches!(self.strategy, Strategy::Mixup | Strategy::Cutout)
        {
            return Err(Error::invalid(format!(
                "semantic_ratio labels need a cut-and-paste strategy, not {}",
                self.strategy
            )));
        }
        if !self.fill.is_finite() {
            return Err(Error::invalid("cutout fill must be finite"));
        }
        Ok(())
    }

    /// Whether the configured label rule needs semantic percent maps.
    pub fn needs_spms(&self) -> bool {
        self.label_strategy == LabelStrategy::SemanticRatio
            && matches!(self.strategy, Strategy::Cutmix | Strategy::Snapmix)
            && self.switch_prob > 0.0
    }
}

/// A mixed (or clean) training sample with its two weighted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MixResult {
    pub image: Image,
    pub label_a: usize,
    pub label_b: usize,
    pub rho_a: f64,
    pub rho_b: f64,
    /// `Strategy::None` marks a clean pass-through sample.
    pub strategy: Strategy,
    pub box_a: Option<BoxRegion>,
    pub box_b: Option<BoxRegion>,
}

impl MixResult {
    pub fn clean(image: Image, label: usize) -> Self {
        Self {
            image,
            label_a: label,
            label_b: label,
            rho_a: 1.0,
            rho_b: 0.0,
            strategy: Strategy::None,
            box_a: None,
            box_b: None,
        }
    }

    pub fn is_mixed(&self) -> bool {
        self.strategy != Strategy::None
    }
}
