//! Label-aware evaluation: cluster-by-class confusion tables, purity, the
//! class-percentage view, and the post-hoc Lloyd's k-means baseline run on a
//! frozen embedding.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::{sample_distinct_rows, Assignment, ClusterHead};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::net::EmbeddingNet;
use crate::trainer::classifier_accuracy;

/// Largest K for which the exhaustive one-to-one cluster/class mapping is
/// computed.
pub const MAX_EXHAUSTIVE_MAPPING_K: usize = 8;

/// Cluster-by-class count table with derived statistics.
///
/// Class columns cover the class ids actually observed, in ascending order
/// (`class_ids`), so a two-class foreground produces a two-column table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionReport {
    /// Observed class ids, ascending; column `j` refers to `class_ids[j]`.
    pub class_ids: Vec<usize>,
    /// `counts[k][j]` = number of samples in cluster `k` with true class
    /// `class_ids[j]`.
    pub counts: Vec<Vec<u64>>,
    /// Column-normalized view: the share of a class that landed in each
    /// cluster. Every column sums to 1 (observed classes are nonempty).
    pub per_class_pct: Vec<Vec<f64>>,
    /// Majority-vote purity: `Σ_k max_c counts[k][c] / Σ counts`.
    pub purity: f64,
    /// Majority class id of each cluster (ties toward the smaller class id).
    pub majority_map: Vec<usize>,
    /// Best accuracy over injective cluster-to-class mappings, reported for
    /// K ≤ min(C, 8) where the exhaustive search is cheap.
    pub one_to_one_accuracy: Option<f64>,
}

impl ConfusionReport {
    pub fn num_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn num_classes(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Builds the confusion table of a cluster assignment against hidden class
/// labels.
pub fn confusion(assignment: &Assignment, hidden_classes: &[usize]) -> Result<ConfusionReport> {
    if assignment.cluster_of.is_empty() {
        return Err(Error::EmptyInput("confusion: no samples"));
    }
    if assignment.cluster_of.len() != hidden_classes.len() {
        return Err(Error::ShapeMismatch {
            op: "confusion",
            left: (assignment.cluster_of.len(), 1),
            right: (hidden_classes.len(), 1),
        });
    }
    let k = assignment.num_clusters();
    let mut class_ids: Vec<usize> = hidden_classes.to_vec();
    class_ids.sort_unstable();
    class_ids.dedup();
    let c = class_ids.len();
    let col_of = |class: usize| class_ids.binary_search(&class).expect("observed class");

    let mut counts = vec![vec![0u64; c]; k];
    for (&cluster, &class) in assignment.cluster_of.iter().zip(hidden_classes) {
        counts[cluster][col_of(class)] += 1;
    }

    let mut class_totals = vec![0u64; c];
    for row in &counts {
        for (t, &v) in class_totals.iter_mut().zip(row) {
            *t += v;
        }
    }
    let per_class_pct = counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&class_totals)
                .map(|(&v, &t)| v as f64 / t as f64)
                .collect()
        })
        .collect();

    let total: u64 = class_totals.iter().sum();
    let mut majority_map = Vec::with_capacity(k);
    let mut majority_sum = 0u64;
    for row in &counts {
        let mut best_col = 0usize;
        let mut best = row[0];
        for (col, &v) in row.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                best_col = col;
            }
        }
        majority_map.push(class_ids[best_col]);
        majority_sum += best;
    }
    let purity = majority_sum as f64 / total as f64;

    let one_to_one_accuracy = if k <= MAX_EXHAUSTIVE_MAPPING_K && k <= c {
        let mut taken = vec![false; c];
        Some(best_injective_sum(&counts, 0, &mut taken) as f64 / total as f64)
    } else {
        None
    };

    Ok(ConfusionReport {
        class_ids,
        counts,
        per_class_pct,
        purity,
        majority_map,
        one_to_one_accuracy,
    })
}

/// Exhaustive best assignment of distinct classes to clusters `k..`.
fn best_injective_sum(counts: &[Vec<u64>], k: usize, taken: &mut [bool]) -> u64 {
    if k == counts.len() {
        return 0;
    }
    let mut best = 0;
    for c in 0..taken.len() {
        if taken[c] {
            continue;
        }
        taken[c] = true;
        let candidate = counts[k][c] + best_injective_sum(counts, k + 1, taken);
        taken[c] = false;
        best = best.max(candidate);
    }
    best
}

/// Result of a Lloyd's k-means run.
#[derive(Debug, Clone)]
pub struct LloydOutcome {
    pub centers: Matrix,
    pub assignment: Assignment,
    /// Σ_n min_k ‖x_n − c_k‖² recorded after every iteration; non-increasing.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Classic Lloyd alternation with seeded distinct-point initialization.
///
/// Stops when the largest center movement falls below `tol` or after
/// `max_iter` iterations. A cluster left empty by an assignment step is
/// re-seeded to the point farthest from its assigned center.
pub fn lloyd_kmeans(
    x: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<LloydOutcome> {
    if k == 0 {
        return Err(Error::InvalidArgument {
            what: "k",
            details: "must be >= 1".into(),
        });
    }
    if x.rows() < k {
        return Err(Error::InsufficientSamples {
            needed: k,
            got: x.rows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = sample_distinct_rows(x, k, &mut rng)?;

    let mut assignment = nearest_assignment(x, &centers);
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        // Means of the current assignment.
        let mut new_centers = Matrix::zeros(k, x.cols());
        for n in 0..x.rows() {
            let c = assignment.cluster_of[n];
            for (acc, &v) in new_centers.row_mut(c).iter_mut().zip(x.row(n)) {
                *acc += v;
            }
        }
        for c in 0..k {
            let count = assignment.counts[c];
            if count > 0 {
                for v in new_centers.row_mut(c) {
                    *v /= count as f64;
                }
            } else {
                new_centers.row_mut(c).copy_from_slice(centers.row(c));
            }
        }
        // Empty clusters grab the worst-fit point.
        let mut used = vec![false; x.rows()];
        for c in 0..k {
            if assignment.counts[c] > 0 {
                continue;
            }
            let mut worst: Option<(usize, f64)> = None;
            for n in 0..x.rows() {
                if used[n] {
                    continue;
                }
                let d = squared_distance(x.row(n), new_centers.row(assignment.cluster_of[n]));
                if worst.is_none_or(|(_, best)| d > best) {
                    worst = Some((n, d));
                }
            }
            if let Some((point, _)) = worst {
                used[point] = true;
                new_centers.row_mut(c).copy_from_slice(x.row(point));
            }
        }

        let mut max_move_sq = 0.0f64;
        for c in 0..k {
            max_move_sq = max_move_sq.max(squared_distance(centers.row(c), new_centers.row(c)));
        }
        centers = new_centers;
        assignment = nearest_assignment(x, &centers);
        trace.push(objective(x, &centers));
        if max_move_sq < tol * tol {
            break;
        }
    }

    Ok(LloydOutcome {
        centers,
        assignment,
        objective_trace: trace,
        iterations,
    })
}

fn nearest_assignment(x: &Matrix, centers: &Matrix) -> Assignment {
    let k = centers.rows();
    let mut cluster_of = Vec::with_capacity(x.rows());
    let mut counts = vec![0usize; k];
    for n in 0..x.rows() {
        let point = x.row(n);
        let mut best = 0usize;
        let mut best_dist = squared_distance(point, centers.row(0));
        for c in 1..k {
            let d = squared_distance(point, centers.row(c));
            if d < best_dist {
                best_dist = d;
                best = c;
            }
        }
        counts[best] += 1;
        cluster_of.push(best);
    }
    Assignment { cluster_of, counts }
}

fn objective(x: &Matrix, centers: &Matrix) -> f64 {
    let mut total = 0.0;
    for n in 0..x.rows() {
        let point = x.row(n);
        let mut best = squared_distance(point, centers.row(0));
        for c in 1..centers.rows() {
            best = best.min(squared_distance(point, centers.row(c)));
        }
        total += best;
    }
    total
}

/// Model evaluation on a held-out dataset.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Confusion of foreground test samples; `None` when the test set has no
    /// foreground samples.
    pub confusion: Option<ConfusionReport>,
    /// Foreground/background classifier accuracy over the full test set.
    pub fg_accuracy: f64,
    pub foreground_count: usize,
    /// Mean k-means loss of the foreground test embeddings under the trained
    /// head.
    pub kmeans_loss: Option<f64>,
}

/// Embeds the foreground test samples, assigns them with the trained head,
/// and tabulates the confusion over hidden classes. Classifier accuracy is
/// reported over the whole test set.
pub fn evaluate_model(net: &EmbeddingNet, head: &ClusterHead, test: &Dataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyInput("evaluate_model test set"));
    }
    let batch = test.full_batch();
    let fg_accuracy = classifier_accuracy(net, &batch)?;

    let fg_rows = batch.foreground_indices();
    if fg_rows.is_empty() {
        return Ok(EvalReport {
            confusion: None,
            fg_accuracy,
            foreground_count: 0,
            kmeans_loss: None,
        });
    }
    let embedded = net.embed(&batch.features.select_rows(&fg_rows))?;
    let (loss, assignment) = crate::cluster::kmeans_loss(&embedded, head)?;
    let classes = test.hidden_classes();
    let fg_classes: Vec<usize> = fg_rows.iter().map(|&i| classes[i]).collect();
    let report = confusion(&assignment, &fg_classes)?;
    Ok(EvalReport {
        confusion: Some(report),
        fg_accuracy,
        foreground_count: fg_rows.len(),
        kmeans_loss: Some(loss),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::InitScheme;
    use crate::dataset::gen_blobs;
    use crate::trainer::{train, TrainConfig};
    use rand::SeedableRng;

    /// Published cluster-by-class counts of a three-cluster moving-object
    /// experiment; majority classes are car, person, and bicycle.
    const PUBLISHED_K3_COUNTS: [[u64; 8]; 3] = [
        // person, rider, car, truck, bus, train, motorcycle, bicycle
        [151, 258, 5195, 89, 127, 25, 127, 1128],
        [4315, 551, 950, 39, 20, 9, 76, 541],
        [17, 7, 180, 5, 5, 1, 4, 450],
    ];

    fn expand(counts: &[Vec<u64>]) -> (Assignment, Vec<usize>) {
        let mut cluster_of = Vec::new();
        let mut classes = Vec::new();
        for (k, row) in counts.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                for _ in 0..v {
                    cluster_of.push(k);
                    classes.push(c);
                }
            }
        }
        let a = Assignment::from_cluster_of(cluster_of, counts.len()).unwrap();
        (a, classes)
    }

    #[test]
    fn purity_replays_the_published_three_cluster_table() {
        let counts: Vec<Vec<u64>> = PUBLISHED_K3_COUNTS.iter().map(|r| r.to_vec()).collect();
        let (a, classes) = expand(&counts);
        let report = confusion(&a, &classes).unwrap();
        assert_eq!(report.total(), 14270);
        assert_eq!(report.counts, counts);
        assert_eq!(report.majority_map, vec![2, 0, 7]); // car, person, bicycle
        assert!((report.purity - 9960.0 / 14270.0).abs() < 1e-12);
        assert!((report.purity - 0.698).abs() < 0.005);
    }

    #[test]
    fn two_class_percentages_are_column_normalized() {
        // Counts reconstructed from the published percentages with equal
        // class sizes of 1000.
        let counts = vec![vec![685u64, 179], vec![315, 821]];
        let (a, classes) = expand(&counts);
        let report = confusion(&a, &classes).unwrap();
        assert!((report.per_class_pct[0][0] - 0.685).abs() < 1e-12);
        assert!((report.per_class_pct[1][0] - 0.315).abs() < 1e-12);
        assert!((report.per_class_pct[0][1] - 0.179).abs() < 1e-12);
        assert!((report.per_class_pct[1][1] - 0.821).abs() < 1e-12);
        assert_eq!(report.majority_map, vec![0, 1]);
        let expected = (685.0 + 821.0) / 2000.0;
        assert!((report.purity - expected).abs() < 1e-12);
        assert!((report.one_to_one_accuracy.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn diagonal_counts_have_unit_purity() {
        let counts = vec![vec![10u64, 0], vec![0, 25]];
        let (a, classes) = expand(&counts);
        let report = confusion(&a, &classes).unwrap();
        assert_eq!(report.purity, 1.0);
        assert_eq!(report.one_to_one_accuracy, Some(1.0));
    }

    #[test]
    fn single_cluster_purity_is_the_max_class_share() {
        let counts = vec![vec![7u64, 3, 10]];
        let (a, classes) = expand(&counts);
        let report = confusion(&a, &classes).unwrap();
        assert!((report.purity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn confusion_rejects_empty_and_mismatched_inputs() {
        let a = Assignment::from_cluster_of(vec![], 2).unwrap();
        assert!(confusion(&a, &[]).is_err());
        let a = Assignment::from_cluster_of(vec![0, 1], 2).unwrap();
        assert!(confusion(&a, &[0]).is_err());
    }

    #[test]
    fn lloyd_two_points_two_clusters() {
        let x = Matrix::from_rows(&[&[0.0, 0.0], &[4.0, 4.0]]).unwrap();
        let out = lloyd_kmeans(&x, 2, 1, 50, 1e-9).unwrap();
        assert_eq!(out.assignment.counts, vec![1, 1]);
        let c0 = out.centers.row(out.assignment.cluster_of[0]);
        let c1 = out.centers.row(out.assignment.cluster_of[1]);
        assert_eq!(c0, &[0.0, 0.0]);
        assert_eq!(c1, &[4.0, 4.0]);
    }

    #[test]
    fn lloyd_k1_returns_the_global_mean() {
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        let out = lloyd_kmeans(&x, 1, 0, 50, 1e-12).unwrap();
        assert!((out.centers.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((out.centers.get(0, 1) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lloyd_recovers_separated_blob_centers() {
        let blobs = gen_blobs(8, 3, 0, 40, 10.0, 0.5, 6).unwrap();
        let x = blobs.dataset.full_batch().features;
        let out = lloyd_kmeans(&x, 3, 2, 100, 1e-9).unwrap();
        for k in 0..3 {
            let mut best = f64::INFINITY;
            for c in 0..3 {
                best = best.min(squared_distance(out.centers.row(k), blobs.fg_centers.row(c)));
            }
            assert!(best < 0.5 * 0.5, "center {k} is {best} away from any true center");
        }
    }

    #[test]
    fn lloyd_objective_never_increases() {
        let blobs = gen_blobs(5, 2, 30, 25, 6.0, 1.5, 12).unwrap();
        let x = blobs.dataset.full_batch().features;
        let out = lloyd_kmeans(&x, 4, 3, 60, 1e-10).unwrap();
        for pair in out.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "objective rose: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn lloyd_rejects_more_clusters_than_points() {
        let x = Matrix::from_rows(&[&[0.0], &[1.0]]).unwrap();
        let err = lloyd_kmeans(&x, 3, 0, 10, 1e-6).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { needed: 3, got: 2 }));
    }

    #[test]
    fn evaluate_model_handles_untrained_and_foreground_free_sets() {
        let blobs = gen_blobs(6, 2, 10, 10, 8.0, 0.5, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let net = EmbeddingNet::init(6, &[8, 4], &mut rng).unwrap();
        let head = ClusterHead::init(4, 2, 1, InitScheme::RandomNormal, None).unwrap();
        let report = evaluate_model(&net, &head, &blobs.dataset).unwrap();
        assert!(report.confusion.is_some());
        assert!(report.fg_accuracy >= 0.0 && report.fg_accuracy <= 1.0);

        let bg_only = gen_blobs(6, 2, 10, 0, 8.0, 0.5, 3).unwrap();
        let report = evaluate_model(&net, &head, &bg_only.dataset).unwrap();
        assert!(report.confusion.is_none());
        assert_eq!(report.foreground_count, 0);
    }

    #[test]
    fn trained_head_on_two_blobs_reaches_high_purity() {
        let blobs = gen_blobs(8, 2, 80, 40, 10.0, 0.5, 14).unwrap();
        let std = crate::dataset::Standardizer::fit(&blobs.dataset).unwrap();
        let scaled = std.apply(&blobs.dataset).unwrap();
        let cfg = TrainConfig {
            k: 2,
            hidden_dims: vec![32, 16],
            epochs: 20,
            batch_size: 32,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train(&scaled.full_batch(), &cfg).unwrap();
        let report = evaluate_model(&out.net, &out.head, &scaled).unwrap();
        let confusion = report.confusion.unwrap();
        assert!(confusion.purity >= 0.95, "purity {}", confusion.purity);
        assert!(report.fg_accuracy > 0.9, "fg accuracy {}", report.fg_accuracy);
    }
}
