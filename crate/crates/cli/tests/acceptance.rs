//! Acceptance suite: one test per criterion, each printing a `[PASS]` (or
//! `[SKIP]`) line. Run with
//! `cargo test -p diffkmeans-cli --test acceptance -- --nocapture`.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use diffkmeans_core::*;

/// Cluster-by-class counts of the published three-cluster moving-object
/// experiment (clusters × 8 classes: person, rider, car, truck, bus, train,
/// motorcycle, bicycle).
const PUBLISHED_K3_COUNTS: [[u64; 8]; 3] = [
    [151, 258, 5195, 89, 127, 25, 127, 1128],
    [4315, 551, 950, 39, 20, 9, 76, 541],
    [17, 7, 180, 5, 5, 1, 4, 450],
];

fn assert_runtime(elapsed: Duration, budget: Duration, what: &str) {
    assert!(
        elapsed <= budget,
        "{what} took {elapsed:?}, budget {budget:?}"
    );
}

#[test]
fn criterion_1_full_objective_gradients_match_finite_differences() {
    let start = Instant::now();
    let cfg = SuiteConfig {
        instances: 20,
        max_samples: 8,
        max_dim: 6,
        k_choices: vec![2, 3],
        epsilon: 1e-4,
        seed: 20240811,
        ..SuiteConfig::default()
    };
    let outcomes = run_gradient_suite(&cfg).unwrap();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for outcome in &outcomes {
        if let InstanceOutcome::Checked(c) = outcome {
            checked += 1;
            assert!(
                c.max_rel_error < 1e-4,
                "instance n={} d={} k={}: rel error {} at {}",
                c.samples,
                c.dim,
                c.k,
                c.max_rel_error,
                c.worst_param
            );
            worst = worst.max(c.max_rel_error);
        }
    }
    assert_eq!(checked, 20);
    let elapsed = start.elapsed();
    assert_runtime(elapsed, Duration::from_secs(10), "criterion 1");
    println!(
        "[PASS] criterion 1: 20 instances, worst max rel error {worst:.3e} < 1e-4 ({elapsed:?})"
    );
}

mod brute_force {
    //! Independent oracles: explicit loops, no shared code with the library
    //! implementations they check.

    pub fn kmeans_loss(x: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for point in x {
            let mut best = f64::INFINITY;
            for center in w {
                let mut dist = 0.0;
                for j in 0..point.len() {
                    let d = point[j] - center[j];
                    dist += d * d;
                }
                if dist < best {
                    best = dist;
                }
            }
            total += best;
        }
        total / (2.0 * x.len() as f64)
    }

    pub fn balance(counts: &[usize], n: usize) -> f64 {
        let k = counts.len();
        let mut acc = 0.0;
        for a in 0..k {
            for b in a..k {
                acc += (counts[a] as f64 - counts[b] as f64).abs();
            }
        }
        acc / (n as f64 * k as f64)
    }
}

#[test]
fn criterion_2_loss_and_balance_match_brute_force_oracles() {
    use rand::{Rng, SeedableRng};
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.random_range(1..=40);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(2..=5);
        let mut x_rows = Vec::with_capacity(n);
        for _ in 0..n {
            x_rows.push((0..d).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<f64>>());
        }
        let mut w_rows = Vec::with_capacity(k);
        for _ in 0..k {
            w_rows.push((0..d).map(|_| rng.random_range(-5.0..5.0)).collect::<Vec<f64>>());
        }

        let x = Matrix::from_vec(n, d, x_rows.iter().flatten().copied().collect()).unwrap();
        let head =
            ClusterHead::from_weights(Matrix::from_vec(k, d, w_rows.iter().flatten().copied().collect()).unwrap())
                .unwrap();
        let (loss, assignment) = kmeans_loss(&x, &head).unwrap();
        let oracle_loss = brute_force::kmeans_loss(&x_rows, &w_rows);
        assert!(
            (loss - oracle_loss).abs() <= 1e-12,
            "loss {loss} vs oracle {oracle_loss}"
        );

        let metric = balance_metric(&assignment, n).unwrap();
        let oracle_metric = brute_force::balance(&assignment.counts, n);
        assert!(
            (metric - oracle_metric).abs() <= 1e-12,
            "balance {metric} vs oracle {oracle_metric}"
        );
    }
    let elapsed = start.elapsed();
    assert_runtime(elapsed, Duration::from_secs(5), "criterion 2");
    println!("[PASS] criterion 2: 100 instances agree with brute force to 1e-12 ({elapsed:?})");
}

#[test]
fn criterion_3_published_three_cluster_purity_replay() {
    let start = Instant::now();
    let mut cluster_of = Vec::new();
    let mut classes = Vec::new();
    for (k, row) in PUBLISHED_K3_COUNTS.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            for _ in 0..count {
                cluster_of.push(k);
                classes.push(c);
            }
        }
    }
    let assignment = Assignment::from_cluster_of(cluster_of, 3).unwrap();
    let report = confusion(&assignment, &classes).unwrap();
    assert_eq!(report.total(), 14270);
    assert!(
        (report.purity - 0.698).abs() <= 0.005,
        "purity {} not within 0.698 +/- 0.005",
        report.purity
    );
    let elapsed = start.elapsed();
    assert_runtime(elapsed, Duration::from_secs(1), "criterion 3");
    println!(
        "[PASS] criterion 3: replayed purity {:.4} within 0.698 +/- 0.005 ({elapsed:?})",
        report.purity
    );
}

#[test]
fn criterion_4_synthetic_end_to_end_across_five_seeds() {
    let start = Instant::now();
    for seed in 1u64..=5 {
        let blobs = gen_blobs(16, 3, 300, 100, 10.0, 0.5, seed).unwrap();
        let cfg = TrainConfig {
            k: 3,
            seed,
            ..TrainConfig::default()
        };
        let outcome = run_experiment(&blobs.dataset, &cfg, 0.25).unwrap();
        let confusion = outcome
            .eval
            .confusion
            .as_ref()
            .expect("test split has foreground samples");
        assert!(
            confusion.purity >= 0.95,
            "seed {seed}: purity {} < 0.95",
            confusion.purity
        );
        assert!(
            outcome.eval.fg_accuracy >= 0.95,
            "seed {seed}: fg/bg accuracy {} < 0.95",
            outcome.eval.fg_accuracy
        );
    }
    let elapsed = start.elapsed();
    assert_runtime(elapsed, Duration::from_secs(120), "criterion 4");
    println!(
        "[PASS] criterion 4: purity >= 0.95 and fg/bg accuracy >= 0.95 on 5/5 seeds ({elapsed:?})"
    );
}

/// Locates CIFAR-10 binary batch files: `$CIFAR10_DIR` or
/// `<workspace>/data/cifar-10-batches-bin`.
fn cifar_files() -> Option<Vec<PathBuf>> {
    let dir = std::env::var_os("CIFAR10_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../..")
                .join("data/cifar-10-batches-bin")
        });
    let mut files: Vec<PathBuf> = (1..=5)
        .map(|i| dir.join(format!("data_batch_{i}.bin")))
        .filter(|p| p.is_file())
        .collect();
    let test_batch = dir.join("test_batch.bin");
    if test_batch.is_file() {
        files.push(test_batch);
    }
    if files.is_empty() {
        None
    } else {
        Some(files)
    }
}

#[test]
fn criterion_5_cifar10_trend_check() {
    let start = Instant::now();
    let Some(files) = cifar_files() else {
        println!(
            "[SKIP] criterion 5: no CIFAR-10 binaries (set CIFAR10_DIR or place \
             data_batch_*.bin under data/cifar-10-batches-bin)"
        );
        return;
    };
    let records = diffkmeans_cli::cifar::read_cifar10_binary(&files).unwrap();
    // automobile = 1, dog = 5; thin the background so the run stays in budget
    let dataset = relabel_foreground(records, &[1, 5]).unwrap();
    let dataset = downsample_background(&dataset, 0.25, 11).unwrap();
    let cfg = TrainConfig {
        k: 2,
        epochs: 10,
        seed: 11,
        ..TrainConfig::default()
    };
    let outcome = run_experiment(&dataset, &cfg, 0.2).unwrap();
    let report = outcome.eval.confusion.as_ref().expect("foreground present");

    assert!(
        outcome.eval.fg_accuracy >= 0.80,
        "fg/bg accuracy {} < 0.80",
        outcome.eval.fg_accuracy
    );
    // per-class majority clusters must differ and be decisive
    assert_eq!(report.class_ids, vec![1, 5]);
    let majority_cluster = |class_col: usize| -> (usize, f64) {
        let mut best = (0usize, 0.0f64);
        for k in 0..report.num_clusters() {
            let share = report.per_class_pct[k][class_col];
            if share > best.1 {
                best = (k, share);
            }
        }
        best
    };
    let (auto_cluster, auto_share) = majority_cluster(0);
    let (dog_cluster, dog_share) = majority_cluster(1);
    assert_ne!(
        auto_cluster, dog_cluster,
        "both classes share majority cluster {auto_cluster}"
    );
    assert!(auto_share >= 0.60, "automobile majority share {auto_share} < 0.60");
    assert!(dog_share >= 0.60, "dog majority share {dog_share} < 0.60");
    let elapsed = start.elapsed();
    assert_runtime(elapsed, Duration::from_secs(30 * 60), "criterion 5");
    println!(
        "[PASS] criterion 5: fg/bg accuracy {:.3}, majority shares {:.3}/{:.3} in distinct \
         clusters ({elapsed:?})",
        outcome.eval.fg_accuracy, auto_share, dog_share
    );
}

#[test]
fn criterion_6_balance_metric_properties_and_hand_values() {
    // zero iff equal
    for counts in [vec![2usize, 2], vec![5, 5, 5], vec![1, 1, 1, 1]] {
        let n: usize = counts.iter().sum();
        let mut cluster_of = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            cluster_of.extend(std::iter::repeat_n(k, c));
        }
        let a = Assignment::from_cluster_of(cluster_of, counts.len()).unwrap();
        assert_eq!(balance_metric(&a, n).unwrap(), 0.0);
    }
    for counts in [vec![3usize, 1], vec![4, 3, 3], vec![1, 0]] {
        let n: usize = counts.iter().sum();
        let mut cluster_of = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            cluster_of.extend(std::iter::repeat_n(k, c));
        }
        let a = Assignment::from_cluster_of(cluster_of, counts.len()).unwrap();
        assert!(balance_metric(&a, n).unwrap() > 0.0);
    }

    // hand cases to 1e-12
    let a = Assignment::from_cluster_of(vec![0, 0, 0, 0], 2).unwrap();
    assert!((balance_metric(&a, 4).unwrap() - 0.5).abs() <= 1e-12);
    let a = Assignment::from_cluster_of(vec![0, 0, 0, 1, 1, 2], 3).unwrap();
    assert!((balance_metric(&a, 6).unwrap() - 0.2222222222222222).abs() <= 1e-12);
    println!("[PASS] criterion 6: balance metric zero-iff-equal and hand values to 1e-12");
}

#[test]
fn criterion_7_cli_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        "run_id = det\ndataset = synthetic\nblob_dim = 8\nblob_classes = 2\n\
         blob_per_class = 30\nblob_background = 40\nk = 2\nhidden_dims = 24,12\n\
         batch_size = 16\nepochs = 4\nseed = 9\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let status = Command::new(env!("CARGO_BIN_EXE_diffkmeans"))
            .args([
                "train",
                "--config",
                config.to_str().unwrap(),
                "--out",
                dir.path().join(out).to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["history.csv", "checkpoint.bin"] {
        let a = std::fs::read(dir.path().join("a/det").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b/det").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    println!("[PASS] criterion 7: identical config+seed give byte-identical history and checkpoint");
}

#[test]
fn criterion_8_lloyd_baseline_on_the_frozen_trained_embedding() {
    let blobs = gen_blobs(16, 3, 300, 100, 10.0, 0.5, 1).unwrap();
    let cfg = TrainConfig {
        k: 3,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = run_experiment(&blobs.dataset, &cfg, 0.25).unwrap();

    let batch = outcome.test_set.full_batch();
    let fg_rows = batch.foreground_indices();
    let embedded = outcome
        .model
        .net
        .embed(&batch.features.select_rows(&fg_rows))
        .unwrap();
    let lloyd = lloyd_kmeans(&embedded, 3, 1, 100, 1e-9).unwrap();
    for pair in lloyd.objective_trace.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-9,
            "objective increased: {} -> {}",
            pair[0],
            pair[1]
        );
    }

    let classes = outcome.test_set.hidden_classes();
    let fg_classes: Vec<usize> = fg_rows.iter().map(|&i| classes[i]).collect();
    let baseline = confusion(&lloyd.assignment, &fg_classes).unwrap();

    // emit both confusion CSVs side by side, as the comparison protocol asks
    let dir = tempfile::tempdir().unwrap();
    diffkmeans_cli::report::write_text(
        &dir.path().join("trained.confusion.csv"),
        &diffkmeans_cli::report::confusion_csv(outcome.eval.confusion.as_ref()),
    )
    .unwrap();
    diffkmeans_cli::report::write_text(
        &dir.path().join("baseline.confusion.csv"),
        &diffkmeans_cli::report::confusion_csv(Some(&baseline)),
    )
    .unwrap();
    assert!(dir.path().join("trained.confusion.csv").is_file());
    assert!(dir.path().join("baseline.confusion.csv").is_file());
    println!(
        "[PASS] criterion 8: Lloyd objective non-increasing over {} iterations; baseline purity \
         {:.4} reported alongside trained purity {:.4} (no threshold asserted)",
        lloyd.iterations,
        baseline.purity,
        outcome.eval.confusion.as_ref().unwrap().purity
    );
}
