//! Implementations of the CLI subcommands. Each returns a [`CliError`]
//! whose `exit_code` the binary propagates: 0 success, 1 check failure,
//! 2 usage/config error, 3 numeric failure.

use std::path::{Path, PathBuf};

use diffkmeans_core::{
    confusion, downsample_background, evaluate_model, gen_blobs, lloyd_kmeans, relabel_foreground,
    run_experiment, run_gradient_suite, split, Dataset, InstanceOutcome, SuiteConfig,
};

use crate::checkpoint;
use crate::cifar::read_cifar10_binary;
use crate::config::{DatasetSource, RunConfig};
use crate::error::{CliError, Result};
use crate::report;

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Tolerance of the gradcheck command; exit code 0 requires every checked
/// instance below it.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = overrides.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

/// Materializes the configured dataset source.
pub fn build_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.source {
        DatasetSource::Synthetic {
            dim,
            classes,
            per_class,
            background,
            separation,
            noise,
        } => Ok(gen_blobs(
            *dim,
            *classes,
            *background,
            *per_class,
            *separation,
            *noise,
            cfg.train.seed,
        )?
        .dataset),
        DatasetSource::Cifar10 {
            paths,
            fg_classes,
            bg_keep,
        } => {
            let records = read_cifar10_binary(paths)?;
            let dataset = relabel_foreground(records, fg_classes)?;
            Ok(downsample_background(&dataset, *bg_keep, cfg.train.seed)?)
        }
    }
}

fn ensure_run_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    Ok(dir)
}

/// Trains a model and writes `checkpoint.bin`, `history.csv`, and the final
/// `<run-id>.confusion.csv` under `<out>/<run-id>/`.
pub fn cmd_train(config_path: &Path, overrides: &Overrides) -> Result<()> {
    let cfg = load_config(config_path, overrides)?;
    let dataset = build_dataset(&cfg)?;
    let outcome = run_experiment(&dataset, &cfg.train, cfg.test_fraction)?;

    let dir = ensure_run_dir(&cfg)?;
    checkpoint::save(
        &dir.join("checkpoint.bin"),
        &outcome.model.net,
        &outcome.model.head,
        &outcome.standardizer,
    )?;
    report::write_text(
        &dir.join("history.csv"),
        &report::history_csv(&outcome.model.history),
    )?;
    report::write_text(
        &dir.join(format!("{}.confusion.csv", cfg.run_id)),
        &report::confusion_csv(outcome.eval.confusion.as_ref()),
    )?;

    for warning in &outcome.model.history.warnings {
        eprintln!("warning: {warning}");
    }
    print!(
        "{}",
        report::summary_text(&cfg.run_id, &outcome.eval, outcome.test_set.len())
    );
    println!("artifacts: {}", dir.display());
    Ok(())
}

/// Loads a checkpoint and dataset config, evaluates on the held-out split,
/// and writes `<run-id>.confusion.csv` and `<run-id>.summary.txt`.
pub fn cmd_eval(
    config_path: &Path,
    overrides: &Overrides,
    checkpoint_path: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config_path, overrides)?;
    let dir = ensure_run_dir(&cfg)?;
    let default_ckpt = dir.join("checkpoint.bin");
    let ckpt = checkpoint::load(checkpoint_path.unwrap_or(&default_ckpt))?;

    let dataset = build_dataset(&cfg)?;
    let (_, test_raw) = split(&dataset, 1.0 - cfg.test_fraction, cfg.train.seed)?;
    let test_set = ckpt.standardizer.apply(&test_raw)?;
    let eval = evaluate_model(&ckpt.net, &ckpt.head, &test_set)?;

    report::write_text(
        &dir.join(format!("{}.confusion.csv", cfg.run_id)),
        &report::confusion_csv(eval.confusion.as_ref()),
    )?;
    let summary = report::summary_text(&cfg.run_id, &eval, test_set.len());
    report::write_text(&dir.join(format!("{}.summary.txt", cfg.run_id)), &summary)?;
    print!("{summary}");
    Ok(())
}

/// Embeds the held-out foreground with a frozen checkpointed network, runs
/// Lloyd's k-means on the activations, and writes
/// `<run-id>.baseline.confusion.csv` for comparison with the trained head.
pub fn cmd_baseline(
    config_path: &Path,
    overrides: &Overrides,
    checkpoint_path: Option<&Path>,
    k_override: Option<usize>,
) -> Result<()> {
    let cfg = load_config(config_path, overrides)?;
    let dir = ensure_run_dir(&cfg)?;
    let default_ckpt = dir.join("checkpoint.bin");
    let ckpt = checkpoint::load(checkpoint_path.unwrap_or(&default_ckpt))?;
    let k = k_override.unwrap_or(ckpt.head.num_clusters());

    let dataset = build_dataset(&cfg)?;
    let (_, test_raw) = split(&dataset, 1.0 - cfg.test_fraction, cfg.train.seed)?;
    let test_set = ckpt.standardizer.apply(&test_raw)?;
    let batch = test_set.full_batch();
    let fg_rows = batch.foreground_indices();
    if fg_rows.is_empty() {
        return Err(CliError::Config {
            path: config_path.to_path_buf(),
            message: "baseline needs at least one foreground sample in the test split".into(),
        });
    }
    let embedded = ckpt.net.embed(&batch.features.select_rows(&fg_rows))?;
    let lloyd = lloyd_kmeans(&embedded, k, cfg.train.seed, 100, 1e-6)?;

    let classes = test_set.hidden_classes();
    let fg_classes: Vec<usize> = fg_rows.iter().map(|&i| classes[i]).collect();
    let baseline_confusion = confusion(&lloyd.assignment, &fg_classes)?;

    report::write_text(
        &dir.join(format!("{}.baseline.confusion.csv", cfg.run_id)),
        &report::confusion_csv(Some(&baseline_confusion)),
    )?;
    println!(
        "baseline k-means on frozen activations: K={k}, {} iterations, purity {:.4}",
        lloyd.iterations, baseline_confusion.purity
    );
    println!(
        "cluster occupancy: {:?}",
        lloyd.assignment.counts
    );
    Ok(())
}

/// Generates the configured synthetic dataset and writes `dataset.csv`.
pub fn cmd_gen_data(config_path: &Path, overrides: &Overrides) -> Result<()> {
    let cfg = load_config(config_path, overrides)?;
    if !matches!(cfg.source, DatasetSource::Synthetic { .. }) {
        return Err(CliError::Config {
            path: config_path.to_path_buf(),
            message: "gen-data requires dataset = synthetic".into(),
        });
    }
    let dataset = build_dataset(&cfg)?;
    let dir = ensure_run_dir(&cfg)?;
    let path = dir.join("dataset.csv");
    report::write_text(&path, &report::dataset_csv(&dataset))?;
    println!(
        "wrote {} samples ({} foreground) to {}",
        dataset.len(),
        dataset.foreground_count(),
        path.display()
    );
    Ok(())
}

/// Options of the gradcheck command.
#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub seed: u64,
    pub instances: usize,
    pub max_samples: usize,
    pub max_dim: usize,
    pub k_values: Vec<usize>,
    pub corrupt: bool,
}

/// Runs the full-objective finite-difference suite and prints one line per
/// instance. Exit code 0 iff every checked instance stays below
/// [`GRADCHECK_TOLERANCE`].
pub fn cmd_gradcheck(opts: &GradCheckOptions) -> Result<()> {
    let suite = SuiteConfig {
        instances: opts.instances,
        max_samples: opts.max_samples,
        max_dim: opts.max_dim,
        k_choices: opts.k_values.clone(),
        seed: opts.seed,
        corrupt: opts.corrupt,
        ..SuiteConfig::default()
    };
    if opts.corrupt {
        eprintln!("note: --corrupt is a test hook; one analytic gradient entry is perturbed");
    }
    let outcomes = run_gradient_suite(&suite)?;
    let mut worst: Option<(f64, String)> = None;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for (i, outcome) in outcomes.iter().enumerate() {
        match outcome {
            InstanceOutcome::Checked(c) => {
                checked += 1;
                println!(
                    "instance {:3}: n={} d={} k={}  max rel err {:.3e}  (worst entry {})",
                    i + 1,
                    c.samples,
                    c.dim,
                    c.k,
                    c.max_rel_error,
                    c.worst_param
                );
                if worst.as_ref().is_none_or(|(w, _)| c.max_rel_error > *w) {
                    worst = Some((c.max_rel_error, c.worst_param.clone()));
                }
            }
            InstanceOutcome::Skipped {
                samples,
                dim,
                k,
                reason,
            } => {
                skipped += 1;
                let what = match reason {
                    diffkmeans_core::suite::SkipReason::AssignmentTie => "tie skipped",
                    diffkmeans_core::suite::SkipReason::ReluKink => "relu kink skipped",
                };
                println!("instance {:3}: n={samples} d={dim} k={k}  {what}", i + 1);
            }
        }
    }
    let (max_rel_error, worst_param) = worst.expect("suite always checks at least one instance");
    println!(
        "gradcheck: {checked} checked, {skipped} skipped, worst {max_rel_error:.3e} at {worst_param}"
    );
    if max_rel_error < GRADCHECK_TOLERANCE {
        println!("gradcheck: PASS (tolerance {GRADCHECK_TOLERANCE:.0e})");
        Ok(())
    } else {
        Err(CliError::GradCheckFailed {
            max_rel_error,
            worst_param,
        })
    }
}
