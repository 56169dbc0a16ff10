//! Experiment orchestration: configured runs, multi-seed studies, the label
//! noise benchmark and result tables.

mod config;
mod noise;
mod report;
mod run;
mod studies;
mod table;

pub use config::{apply_override, DataConfig, DataKind, ExperimentConfig, TrainConfig};
pub use noise::{noise_benchmark, NoiseReport};
pub use report::{
    best, mean_final_k, parse_epochs_csv, EpochRecord, RunReport, RunStatus, RunSummary, EPOCH_CSV_HEADER,
};
pub use run::{
    evaluate, run_dir_name, run_experiment, run_on_dataset, RunOutcome, CHECKPOINT_FILE, CONFIG_SNAPSHOT,
};
pub use studies::{
    ablation_grid, alpha_sweep, cells_table, multi_seed, sweep_spread, sweep_table, sweep_wide_text,
    CellResult, GridCell, CELL_TABLE_HEADERS, REFERENCE_ALPHAS, SWEEP_TABLE_HEADERS,
};
pub use table::Table;
