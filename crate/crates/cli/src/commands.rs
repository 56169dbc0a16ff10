use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use snapmix_core::augment::{apply_mix, LabeledImage};
use snapmix_core::cam::spm_for;
use snapmix_core::data::{self, Dataset, IngestOptions};
use snapmix_core::harness::{
    ablation_grid, alpha_sweep, cells_table, evaluate, multi_seed, noise_benchmark, run_dir_name,
    run_on_dataset, sweep_spread, sweep_table, sweep_wide_text, DataKind, ExperimentConfig, RunOutcome,
    RunStatus, Table, REFERENCE_ALPHAS,
};
use snapmix_core::model::Checkpoint;
use snapmix_core::rng::substream;
use snapmix_core::{BoxRegion, Classifier, Error, LabelStrategy, MixConfig, Strategy};

use crate::output::{prepare_dir, usage, write_json, write_table, write_text, UsageError};
use crate::render::{panel, PanelInputs};
use crate::{Command, ConfigArgs, OutArgs};

/// Header of the noise benchmark table.
pub const NOISE_HEADERS: [&str; 6] = [
    "model",
    "alpha",
    "symmetric",
    "trials",
    "mae_semantic",
    "mae_area",
];

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        _ => 1,
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { config, seed, out } => train(&config, seed, &out),
        Command::Eval { config, checkpoint } => eval(&config, &checkpoint),
        Command::Preview {
            config,
            checkpoint,
            strategy,
            count,
            seed,
            out,
        } => preview(&config, &checkpoint, strategy, count, seed, &out),
        Command::NoiseBench {
            config,
            checkpoint,
            trials,
            alpha,
            seed,
            out,
        } => noise_bench(&config, checkpoint.as_deref(), trials, alpha, seed, &out),
        Command::Sweep {
            config,
            alphas,
            seed,
            out,
        } => sweep(&config, &alphas, seed, &out),
        Command::Ablation {
            config,
            with_mixup,
            seed,
            out,
        } => ablation(&config, with_mixup, seed, &out),
        Command::Compare {
            config,
            strategies,
            switch_prob,
            seed,
            out,
        } => compare(&config, &strategies, switch_prob, seed, &out),
        Command::GenData { config, out } => gen_data(&config, &out),
        Command::Ingest {
            path,
            resize,
            seed,
            out,
        } => ingest(&path, resize, seed, &out),
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    if !args.config.is_file() {
        return Err(usage(format!("config file {} not found", args.config.display())));
    }
    Ok(ExperimentConfig::load(&args.config, &args.overrides)?)
}

/// Config with `train.seeds` narrowed to `seed` when given.
fn load_config_seeded(args: &ConfigArgs, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = load_config(args)?;
    if let Some(s) = seed {
        cfg.train.seeds = vec![s];
    }
    Ok(cfg)
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.data.load().context("loading dataset")
}

fn load_model(cfg: &ExperimentConfig, ds: &Dataset, path: &Path) -> Result<Classifier> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let expected = cfg.architecture(ds.image_dims()?, ds.num_classes());
    let got = ckpt.model.arch();
    if got != &expected {
        bail!(
            "checkpoint {} is incompatible with the dataset/config: checkpoint expects \
             {}x{}x{} input, {} classes, channels {:?}; config gives {}x{}x{} input, {} classes, channels {:?}",
            path.display(),
            got.input_channels,
            got.input_height,
            got.input_width,
            got.num_classes,
            got.model.channels,
            expected.input_channels,
            expected.input_height,
            expected.input_width,
            expected.num_classes,
            expected.model.channels,
        );
    }
    Ok(ckpt.model)
}

fn persist_run(runs_dir: &Path, cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<PathBuf> {
    let dir = runs_dir.join(run_dir_name(&outcome.report.config_hash, outcome.report.seed));
    outcome.persist(&dir, cfg)?;
    Ok(dir)
}

fn train(args: &ConfigArgs, seed: Option<u64>, out: &OutArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let seeds = seed.map_or_else(|| cfg.train.seeds.clone(), |s| vec![s]);
    let root = out.dir("train");
    let hash = cfg.hash();
    for &s in &seeds {
        prepare_dir(&root.join(run_dir_name(&hash, s)), out.force)?;
    }
    let ds = load_dataset(&cfg)?;
    let mut failed = Vec::new();
    for &s in &seeds {
        let outcome = run_on_dataset(&cfg, &ds, s)?;
        let dir = persist_run(&root, &cfg, &outcome)?;
        let r = &outcome.report;
        println!(
            "seed {s}: {} epochs, mean_final_k_acc {:.2}, best_acc {:.2} -> {}",
            r.epochs.len(),
            r.mean_final_k_acc,
            r.best_acc,
            dir.display()
        );
        if r.status == RunStatus::Failed {
            failed.push(format!("seed {s}: {}", r.failure.as_deref().unwrap_or("failed")));
        }
    }
    if !failed.is_empty() {
        bail!("training aborted: {}", failed.join("; "));
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput {
    test_acc: f64,
    samples: usize,
}

fn eval(args: &ConfigArgs, checkpoint: &Path) -> Result<()> {
    let cfg = load_config(args)?;
    let ds = load_dataset(&cfg)?;
    let model = load_model(&cfg, &ds, checkpoint)?;
    let acc = evaluate(&model, &ds.test, &cfg.data.preprocess())?;
    let text = serde_json::to_string(&EvalOutput {
        test_acc: acc,
        samples: ds.test.len(),
    })?;
    println!("{text}");
    Ok(())
}

/// Sidecar written next to every preview panel.
#[derive(Debug, Serialize, Deserialize)]
pub struct PanelSidecar {
    pub index: usize,
    pub panel: String,
    pub strategy: Strategy,
    pub label_strategy: LabelStrategy,
    pub symmetric: bool,
    pub alpha: f64,
    /// Indices into the test split.
    pub sample_a: usize,
    pub sample_b: usize,
    pub label_a: usize,
    pub label_b: usize,
    pub rho_a: f64,
    pub rho_b: f64,
    pub box_a: Option<BoxRegion>,
    pub box_b: Option<BoxRegion>,
    /// Row-major `[height][width]` maps, each summing to one.
    pub spm_a: Vec<Vec<f64>>,
    pub spm_b: Vec<Vec<f64>>,
}

fn rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn preview(
    args: &ConfigArgs,
    checkpoint: &Path,
    strategy: Strategy,
    count: usize,
    seed: u64,
    out: &OutArgs,
) -> Result<()> {
    if strategy == Strategy::None {
        return Err(usage("preview needs a mixing strategy, not `none`"));
    }
    let cfg = load_config(args)?;
    let ds = load_dataset(&cfg)?;
    let model = load_model(&cfg, &ds, checkpoint)?;
    if ds.test.len() < 2 {
        bail!("preview needs at least two test samples");
    }
    let base = if cfg.mix.strategy == strategy {
        cfg.mix.clone()
    } else {
        MixConfig::preset(strategy)
    };
    let mix = MixConfig {
        switch_prob: 1.0,
        ..base
    };
    let dir = out.dir("preview");
    prepare_dir(&dir, out.force)?;
    let preprocess = cfg.data.preprocess();
    let n = ds.test.len();
    for index in 0..count {
        let mut rng = substream(seed, "preview", index as u64);
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let batch = [a, b]
            .iter()
            .map(|&i| {
                Ok(LabeledImage {
                    image: preprocess.eval_view(&ds.test[i].image)?,
                    label: ds.test[i].label,
                })
            })
            .collect::<snapmix_core::Result<Vec<_>>>()?;
        let spm_a = spm_for(&model, &batch[0].image, batch[0].label)?.to_dense();
        let spm_b = spm_for(&model, &batch[1].image, batch[1].label)?.to_dense();
        let mut provider = |i: usize| spm_for(&model, &batch[i].image, batch[i].label);
        let mixed = apply_mix(&batch, &mut provider, &mix, &mut rng)?
            .samples
            .swap_remove(0);
        let img = panel(&PanelInputs {
            image_a: &batch[0].image,
            image_b: &batch[1].image,
            mixed: &mixed.image,
            box_a: mixed.box_a.as_ref(),
            box_b: mixed.box_b.as_ref(),
            spm_a: &spm_a,
            spm_b: &spm_b,
        });
        let name = format!(
            "panel_{index:03}_rhoa{:.4}_rhob{:.4}.png",
            mixed.rho_a, mixed.rho_b
        );
        img.save(dir.join(&name))
            .with_context(|| format!("writing {}", dir.join(&name).display()))?;
        let sidecar = PanelSidecar {
            index,
            panel: name,
            strategy: mixed.strategy,
            label_strategy: mix.label_strategy,
            symmetric: mix.symmetric,
            alpha: mix.alpha,
            sample_a: a,
            sample_b: b,
            label_a: mixed.label_a,
            label_b: mixed.label_b,
            rho_a: mixed.rho_a,
            rho_b: mixed.rho_b,
            box_a: mixed.box_a,
            box_b: mixed.box_b,
            spm_a: rows(&spm_a),
            spm_b: rows(&spm_b),
        };
        write_json(&dir.join(format!("panel_{index:03}.json")), &sidecar)?;
    }
    println!("{count} panels -> {}", dir.display());
    Ok(())
}

fn noise_bench(
    args: &ConfigArgs,
    checkpoint: Option<&Path>,
    trials: usize,
    alpha: Option<f64>,
    seed: u64,
    out: &OutArgs,
) -> Result<()> {
    let cfg = load_config(args)?;
    let mut mix = cfg.mix.clone();
    if let Some(a) = alpha {
        mix.alpha = a;
    }
    mix.validate().map_err(|e| usage(format!("--alpha: {e}")))?;
    let dir = out.dir("noise-bench");
    prepare_dir(&dir, out.force)?;
    let ds = load_dataset(&cfg)?;
    let arch = cfg.architecture(ds.image_dims()?, ds.num_classes());
    let mut models = vec![("untrained".to_string(), Classifier::zeroed(arch)?)];
    if let Some(path) = checkpoint {
        models.push(("checkpoint".to_string(), load_model(&cfg, &ds, path)?));
    }
    let mut table = Table::new(&NOISE_HEADERS);
    let mut reports = Vec::new();
    for (name, model) in &models {
        let mut rng = substream(seed, "noise", 0);
        let r = noise_benchmark(&ds.test, &mix, model, trials, &mut rng)?;
        table.push(vec![
            name.clone(),
            r.alpha.to_string(),
            r.symmetric.to_string(),
            r.trials.to_string(),
            format!("{:.6}", r.mae_semantic),
            format!("{:.6}", r.mae_area),
        ]);
        reports.push(serde_json::json!({
            "model": name,
            "alpha": r.alpha,
            "symmetric": r.symmetric,
            "trials": r.trials,
            "mae_semantic": r.mae_semantic,
            "mae_area": r.mae_area,
        }));
    }
    write_json(&dir.join("noise.json"), &reports)?;
    write_table(&dir, "noise", &table)
}

fn study_dir(out: &OutArgs, command: &str) -> Result<PathBuf> {
    let dir = out.dir(command);
    prepare_dir(&dir, out.force)?;
    Ok(dir)
}

fn sweep(args: &ConfigArgs, alphas: &[f64], seed: Option<u64>, out: &OutArgs) -> Result<()> {
    let cfg = load_config_seeded(args, seed)?;
    let alphas = if alphas.is_empty() {
        REFERENCE_ALPHAS.to_vec()
    } else {
        alphas.to_vec()
    };
    for &a in &alphas {
        MixConfig {
            alpha: a,
            ..cfg.mix.clone()
        }
        .validate()
        .map_err(|e| usage(format!("--alphas: {e}")))?;
    }
    let dir = study_dir(out, "sweep")?;
    let ds = load_dataset(&cfg)?;
    let runs = dir.join("runs");
    let results = alpha_sweep(&cfg, &ds, &alphas, &mut |c, o| {
        persist_run(&runs, c, o).map(|_| ()).map_err(core_error)
    })?;
    write_table(&dir, "sweep", &sweep_table(&results))?;
    write_text(&dir.join("sweep_wide.txt"), &sweep_wide_text(&results))?;
    println!("spread (max - min mean_acc): {:.2}", sweep_spread(&results));
    Ok(())
}

fn ablation(args: &ConfigArgs, with_mixup: bool, seed: Option<u64>, out: &OutArgs) -> Result<()> {
    let cfg = load_config_seeded(args, seed)?;
    let dir = study_dir(out, "ablation")?;
    let ds = load_dataset(&cfg)?;
    let runs = dir.join("runs");
    let cells = ablation_grid(&cfg, &ds, with_mixup, &mut |c, o| {
        persist_run(&runs, c, o).map(|_| ()).map_err(core_error)
    })?;
    write_table(&dir, "ablation", &cells_table(&cells))
}

fn compare(
    args: &ConfigArgs,
    strategies: &[Strategy],
    switch_prob: Option<f64>,
    seed: Option<u64>,
    out: &OutArgs,
) -> Result<()> {
    let cfg = load_config_seeded(args, seed)?;
    if let Some(p) = switch_prob {
        if !(0.0..=1.0).contains(&p) {
            return Err(usage(format!("--switch-prob must be in [0, 1], got {p}")));
        }
    }
    let dir = study_dir(out, "compare")?;
    let ds = load_dataset(&cfg)?;
    let runs = dir.join("runs");
    let mut cells = Vec::new();
    for &s in strategies {
        let mut mix = MixConfig::preset(s);
        if let (Some(p), true) = (switch_prob, s != Strategy::None) {
            mix.switch_prob = p;
        }
        let c = ExperimentConfig { mix, ..cfg.clone() };
        cells.push(multi_seed(s.name(), &c, &ds, &mut |c, o| {
            persist_run(&runs, c, o).map(|_| ()).map_err(core_error)
        })?);
    }
    write_table(&dir, "compare", &cells_table(&cells))
}

fn core_error(e: anyhow::Error) -> Error {
    match e.downcast::<Error>() {
        Ok(e) => e,
        Err(e) => Error::Dataset(format!("{e:#}")),
    }
}

fn gen_data(args: &ConfigArgs, out: &OutArgs) -> Result<()> {
    let cfg = load_config(args)?;
    if cfg.data.kind != DataKind::Synthetic {
        return Err(usage("gen-data needs data.kind = \"synthetic\""));
    }
    let dir = out.dir("data");
    prepare_dir(&dir, out.force)?;
    let ds = data::generate(&cfg.data.synthetic)?;
    let records = data::export_dataset(&ds, &dir)?;
    println!(
        "{} images -> {}",
        records.len(),
        dir.join("manifest.jsonl").display()
    );
    Ok(())
}

fn ingest(path: &Path, resize: usize, seed: u64, out: &OutArgs) -> Result<()> {
    if !path.is_dir() {
        return Err(usage(format!("{} is not a directory", path.display())));
    }
    if resize == 0 {
        return Err(usage("--resize must be >= 1"));
    }
    let dir = out.dir("ingest");
    prepare_dir(&dir, out.force)?;
    let opts = IngestOptions {
        resize,
        crop: resize,
        seed,
        ..IngestOptions::default()
    };
    let (ds, report) = data::ingest_folder(path, &opts)?;
    let records = data::export_dataset(&ds, &dir)?;
    write_json(&dir.join("ingest_report.json"), &report)?;
    println!(
        "{} images ({} skipped) -> {}",
        records.len(),
        report.skipped.len(),
        dir.join("manifest.jsonl").display()
    );
    Ok(())
}
