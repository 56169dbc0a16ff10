//! `snapmix`: train, evaluate, preview and benchmark data-mixing strategies.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod output;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snapmix_core::Strategy;

#[derive(Parser, Debug)]
#[command(name = "snapmix", version, about = "SnapMix data-mixing experiments")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// `dotted.key=value`, applied after the file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Output directory. Defaults to a per-command folder under $SNAPMIX_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "SNAPMIX_OUT", default_value = "runs", hide_env_values = true)]
    out_root: PathBuf,
    /// Allow replacing existing artifacts.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run per seed and write its run directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Train only this seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Test accuracy of a checkpoint on the configured dataset.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Render mixed samples with boxes and SPM overlays, plus JSON sidecars.
    Preview {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "snapmix")]
        strategy: Strategy,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Label-noise benchmark: semantic vs area ratio labels against ground truth.
    NoiseBench {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trained model to evaluate; the untrained reference row is always included.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Beta concentration for the boxes; defaults to `mix.alpha`.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Multi-seed run per alpha.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated alphas; defaults to the reference grid.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        /// Run only this seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Mixing geometry x label rule grid, multi-seed per cell.
    Ablation {
        #[command(flatten)]
        config: ConfigArgs,
        /// Add a MixUp row.
        #[arg(long)]
        with_mixup: bool,
        /// Run only this seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Multi-seed comparison of strategies at their reference settings.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated strategies.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "none,mixup,cutout,cutmix,snapmix"
        )]
        strategies: Vec<Strategy>,
        /// Use this switch probability for every mixing strategy instead of its preset.
        #[arg(long)]
        switch_prob: Option<f64>,
        /// Run only this seed instead of every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write the configured synthetic dataset as PNGs plus a manifest.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Ingest a directory-per-class image folder into a manifest dataset.
    Ingest {
        /// Dataset root.
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value_t = 512)]
        resize: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
