//! Multi-seed studies: strategy comparisons, the mixing x label ablation grid
//! and alpha sweeps.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::RunReport;
use super::run::run_on_dataset;
use super::table::Table;
use crate::augment::{LabelStrategy, MixConfig, Strategy};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// The alpha grid of the reference hyperparameter study.
pub const REFERENCE_ALPHAS: [f64; 7] = [0.2, 0.5, 1.0, 3.0, 5.0, 7.0, 8.0];

/// One configuration run over every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub name: String,
    pub config_hash: String,
    pub reports: Vec<RunReport>,
    /// Mean over seeds of each run's final-k mean accuracy.
    pub mean_acc: f64,
    /// Population standard deviation over seeds.
    pub std_acc: f64,
    pub mean_best_acc: f64,
}

impl CellResult {
    pub fn from_reports(name: impl Into<String>, config_hash: String, reports: Vec<RunReport>) -> Self {
        let accs: Vec<f64> = reports.iter().map(|r| r.mean_final_k_acc).collect();
        let n = accs.len().max(1) as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let mean_best_acc = reports.iter().map(|r| r.best_acc).sum::<f64>() / n;
        Self {
            name: name.into(),
            config_hash,
            reports,
            mean_acc: mean,
            std_acc: var.sqrt(),
            mean_best_acc,
        }
    }
}

/// Runs `config` once per seed in `config.train.seeds`, calling `on_run` after each.
pub fn multi_seed(
    name: &str,
    config: &ExperimentConfig,
    dataset: &Dataset,
    on_run: &mut dyn FnMut(&ExperimentConfig, &super::run::RunOutcome) -> Result<()>,
) -> Result<CellResult> {
    let mut reports = Vec::new();
    for &seed in &config.train.seeds {
        let outcome = run_on_dataset(config, dataset, seed)?;
        on_run(config, &outcome)?;
        reports.push(outcome.report);
    }
    Ok(CellResult::from_reports(name, config.hash(), reports))
}

/// One cell of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub symmetric: bool,
    pub labels: LabelStrategy,
}

impl GridCell {
    pub const ALL: [GridCell; 4] = [
        GridCell {
            symmetric: true,
            labels: LabelStrategy::AreaRatio,
        },
        GridCell {
            symmetric: true,
            labels: LabelStrategy::SemanticRatio,
        },
        GridCell {
            symmetric: false,
            labels: LabelStrategy::AreaRatio,
        },
        GridCell {
            symmetric: false,
            labels: LabelStrategy::SemanticRatio,
        },
    ];

    pub fn name(&self) -> String {
        let mixing = if self.symmetric { "symmetric" } else { "asymmetric" };
        format!("{mixing}+{}", self.labels.name())
    }

    /// The snapmix operator with this cell's geometry and label rule; alpha and
    /// switch probability come from `base`.
    pub fn mix_config(&self, base: &MixConfig) -> MixConfig {
        MixConfig {
            strategy: Strategy::Snapmix,
            symmetric: self.symmetric,
            label_strategy: self.labels,
            ..base.clone()
        }
    }
}

/// `{symmetric, asymmetric} x {area_ratio, semantic_ratio}`, plus an optional
/// MixUp row using the MixUp reference preset with `base`'s switch probability.
/// The `(asymmetric, semantic_ratio)` cell is SnapMix; `(symmetric, area_ratio)`
/// is CutMix.
pub fn ablation_grid(
    base: &ExperimentConfig,
    dataset: &Dataset,
    include_mixup: bool,
    on_run: &mut dyn FnMut(&ExperimentConfig, &super::run::RunOutcome) -> Result<()>,
) -> Result<Vec<CellResult>> {
    let mut out = Vec::new();
    for cell in GridCell::ALL {
        let cfg = ExperimentConfig {
            mix: cell.mix_config(&base.mix),
            ..base.clone()
        };
        out.push(multi_seed(&cell.name(), &cfg, dataset, on_run)?);
    }
    if include_mixup {
        let cfg = ExperimentConfig {
            mix: MixConfig {
                switch_prob: base.mix.switch_prob,
                ..MixConfig::preset(Strategy::Mixup)
            },
            ..base.clone()
        };
        out.push(multi_seed("mixup", &cfg, dataset, on_run)?);
    }
    Ok(out)
}

/// One multi-seed run per alpha with everything else from `base`.
pub fn alpha_sweep(
    base: &ExperimentConfig,
    dataset: &Dataset,
    alphas: &[f64],
    on_run: &mut dyn FnMut(&ExperimentConfig, &super::run::RunOutcome) -> Result<()>,
) -> Result<Vec<(f64, CellResult)>> {
    if alphas.is_empty() {
        return Err(Error::invalid("alpha sweep needs at least one alpha"));
    }
    if let Some(bad) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid(format!("alpha must be > 0, got {bad}")));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = ExperimentConfig {
                mix: MixConfig {
                    alpha,
                    ..base.mix.clone()
                },
                ..base.clone()
            };
            Ok((
                alpha,
                multi_seed(&format!("alpha={alpha}"), &cfg, dataset, on_run)?,
            ))
        })
        .collect()
}

/// Spread (max - min) of the per-alpha mean accuracies.
pub fn sweep_spread(results: &[(f64, CellResult)]) -> f64 {
    let accs = results.iter().map(|(_, c)| c.mean_acc);
    let max = accs.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = accs.fold(f64::INFINITY, f64::min);
    if results.is_empty() {
        0.0
    } else {
        max - min
    }
}

pub const CELL_TABLE_HEADERS: [&str; 6] = [
    "cell",
    "mean_acc",
    "std_acc",
    "mean_best_acc",
    "seeds",
    "config_hash",
];

/// One row per cell.
pub fn cells_table(cells: &[CellResult]) -> Table {
    let mut t = Table::new(&CELL_TABLE_HEADERS);
    for c in cells {
        t.push(vec![
            c.name.clone(),
            format!("{:.4}", c.mean_acc),
            format!("{:.4}", c.std_acc),
            format!("{:.4}", c.mean_best_acc),
            c.reports.len().to_string(),
            c.config_hash.clone(),
        ]);
    }
    t
}

pub const SWEEP_TABLE_HEADERS: [&str; 6] = [
    "alpha",
    "mean_acc",
    "std_acc",
    "mean_best_acc",
    "seeds",
    "config_hash",
];

/// One row per alpha.
pub fn sweep_table(results: &[(f64, CellResult)]) -> Table {
    let mut t = Table::new(&SWEEP_TABLE_HEADERS);
    for (alpha, c) in results {
        t.push(vec![
            alpha.to_string(),
            format!("{:.4}", c.mean_acc),
            format!("{:.4}", c.std_acc),
            format!("{:.4}", c.mean_best_acc),
            c.reports.len().to_string(),
            c.config_hash.clone(),
        ]);
    }
    t
}

/// The sweep laid out with one column per alpha, as in the reference study.
pub fn sweep_wide_text(results: &[(f64, CellResult)]) -> String {
    let mut headers = vec!["alpha".to_string()];
    let mut row = vec!["acc".to_string()];
    for (alpha, c) in results {
        headers.push(alpha.to_string());
        row.push(format!("{:.2}", c.mean_acc));
    }
    let refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    t.push(row);
    t.to_text()
}
