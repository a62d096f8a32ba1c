//! Cluster means stored as learnable weights: the k-means objective, its
//! gradients with respect to both the cluster weights and the input
//! activations, L2 regularization, and the occupancy balance metric.
//!
//! The argmin assignment is treated as locally constant, so gradients flow
//! through the selected-cluster branch only. Ties break toward the smallest
//! cluster index so runs are reproducible.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

/// Minimum L2 distance between any two cluster weights after init.
pub const MIN_CLUSTER_SEPARATION: f64 = 1e-6;

/// How cluster weights are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Entries drawn from N(0, 0.1²).
    RandomNormal,
    /// K pairwise-distinct rows copied from a provided point set, visited in
    /// seeded shuffled order.
    SamplePoints,
    /// A seeded random first row, then greedy maximin: each next weight is
    /// the point farthest from all weights chosen so far. Spreads the head
    /// across the data before training and is the default, since uniform
    /// sampling routinely places two weights in one mode.
    FarthestPoint,
}

/// K learnable cluster-mean vectors plus their gradient buffer.
#[derive(Debug, Clone)]
pub struct ClusterHead {
    weights: Matrix,
    grad_weights: Matrix,
}

/// Hard assignment of N points to K clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// `cluster_of[n]` is the index of the cluster point `n` belongs to.
    pub cluster_of: Vec<usize>,
    /// `counts[k]` is the number of points assigned to cluster `k`.
    pub counts: Vec<usize>,
}

impl Assignment {
    /// Builds an assignment from per-point cluster indices, tallying counts.
    pub fn from_cluster_of(cluster_of: Vec<usize>, k: usize) -> Result<Self> {
        let mut counts = vec![0usize; k];
        for &c in &cluster_of {
            if c >= k {
                return Err(Error::InvalidArgument {
                    what: "cluster index",
                    details: format!("index {c} out of range for K={k}"),
                });
            }
            counts[c] += 1;
        }
        Ok(Assignment { cluster_of, counts })
    }

    pub fn len(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_of.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.counts.len()
    }
}

impl ClusterHead {
    /// Seeded initialization under the given scheme. `points` is required for
    /// [`InitScheme::SamplePoints`] and must supply at least K pairwise
    /// distinct rows.
    pub fn init(
        dim: usize,
        k: usize,
        seed: u64,
        scheme: InitScheme,
        points: Option<&Matrix>,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument {
                what: "cluster count",
                details: format!("K must be >= 2, got {k}"),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidArgument {
                what: "embedding dimension",
                details: "must be >= 1".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = match scheme {
            InitScheme::RandomNormal => {
                let mut weights = Matrix::zeros(k, dim);
                let mut ok = false;
                // Collisions are a measure-zero event; a handful of redraws
                // keeps the distinctness invariant unconditional.
                for _ in 0..16 {
                    for w in weights.data_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *w = 0.1 * z;
                    }
                    if pairwise_distinct(&weights) {
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    return Err(Error::InitFailure(format!(
                        "could not draw {k} pairwise-distinct cluster weights"
                    )));
                }
                weights
            }
            InitScheme::SamplePoints | InitScheme::FarthestPoint => {
                let points = points.ok_or(Error::InvalidArgument {
                    what: "init points",
                    details: "point-based init requires a point set".into(),
                })?;
                if points.cols() != dim {
                    return Err(Error::ShapeMismatch {
                        op: "init_clusters",
                        left: points.shape(),
                        right: (k, dim),
                    });
                }
                if scheme == InitScheme::SamplePoints {
                    sample_distinct_rows(points, k, &mut rng)?
                } else {
                    farthest_point_rows(points, k, &mut rng)?
                }
            }
        };
        Ok(ClusterHead {
            grad_weights: Matrix::zeros(k, dim),
            weights,
        })
    }

    /// Rebuilds a head from explicit weights (checkpoint loading).
    pub fn from_weights(weights: Matrix) -> Result<Self> {
        if weights.rows() < 2 {
            return Err(Error::InvalidArgument {
                what: "cluster count",
                details: format!("K must be >= 2, got {}", weights.rows()),
            });
        }
        Ok(ClusterHead {
            grad_weights: Matrix::zeros(weights.rows(), weights.cols()),
            weights,
        })
    }

    #[inline]
    pub fn num_clusters(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn grad_weights(&self) -> &Matrix {
        &self.grad_weights
    }

    pub fn grad_weights_mut(&mut self) -> &mut Matrix {
        &mut self.grad_weights
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.fill(0.0);
    }

    /// Weight entries and their gradient, borrowed together for an optimizer
    /// step.
    pub fn weights_and_grad(&mut self) -> (&mut [f64], &[f64]) {
        (self.weights.data_mut(), self.grad_weights.data())
    }
}

fn pairwise_distinct(weights: &Matrix) -> bool {
    let min_sq = MIN_CLUSTER_SEPARATION * MIN_CLUSTER_SEPARATION;
    for a in 0..weights.rows() {
        for b in (a + 1)..weights.rows() {
            if squared_distance(weights.row(a), weights.row(b)) <= min_sq {
                return false;
            }
        }
    }
    true
}

/// Copies `k` pairwise-distinct rows of `points`, visiting rows in seeded
/// shuffled order.
pub(crate) fn sample_distinct_rows<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Result<Matrix> {
    let min_sq = MIN_CLUSTER_SEPARATION * MIN_CLUSTER_SEPARATION;
    let mut order: Vec<usize> = (0..points.rows()).collect();
    order.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for idx in order {
        let candidate = points.row(idx);
        let distinct = chosen
            .iter()
            .all(|&c| squared_distance(points.row(c), candidate) > min_sq);
        if distinct {
            chosen.push(idx);
            if chosen.len() == k {
                break;
            }
        }
    }
    if chosen.len() < k {
        return Err(Error::InitFailure(format!(
            "requested {k} clusters but only {} distinct points are available",
            chosen.len()
        )));
    }
    Ok(points.select_rows(&chosen))
}

/// Greedy maximin row selection: a seeded random first row, then the row
/// maximizing the minimum distance to everything chosen so far (ties toward
/// the smallest row index).
pub(crate) fn farthest_point_rows<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Result<Matrix> {
    if points.rows() == 0 {
        return Err(Error::EmptyInput("farthest_point init: no points"));
    }
    let min_sq = MIN_CLUSTER_SEPARATION * MIN_CLUSTER_SEPARATION;
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..points.rows()));
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for n in 0..points.rows() {
            let nearest = chosen
                .iter()
                .map(|&c| squared_distance(points.row(c), points.row(n)))
                .fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, d)| nearest > d) {
                best = Some((n, nearest));
            }
        }
        let (idx, gap) = best.expect("points is nonempty");
        if gap <= min_sq {
            return Err(Error::InitFailure(format!(
                "requested {k} clusters but only {} distinct points are available",
                chosen.len()
            )));
        }
        chosen.push(idx);
    }
    Ok(points.select_rows(&chosen))
}

/// Assigns every row of `x` to its nearest cluster weight under squared
/// Euclidean distance. Ties break toward the smallest cluster index.
pub fn assign(x: &Matrix, head: &ClusterHead) -> Result<Assignment> {
    Ok(assign_with_loss(x, head)?.0)
}

fn assign_with_loss(x: &Matrix, head: &ClusterHead) -> Result<(Assignment, f64)> {
    if x.cols() != head.dim() {
        return Err(Error::ShapeMismatch {
            op: "assign",
            left: x.shape(),
            right: head.weights.shape(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::EmptyInput("assign: no points"));
    }
    let k = head.num_clusters();
    let mut cluster_of = Vec::with_capacity(x.rows());
    let mut counts = vec![0usize; k];
    let mut total = 0.0;
    for n in 0..x.rows() {
        let point = x.row(n);
        let mut best = 0usize;
        let mut best_dist = squared_distance(point, head.weights.row(0));
        for c in 1..k {
            let d = squared_distance(point, head.weights.row(c));
            if d < best_dist {
                best_dist = d;
                best = c;
            }
        }
        total += best_dist;
        counts[best] += 1;
        cluster_of.push(best);
    }
    Ok((Assignment { cluster_of, counts }, total))
}

/// The k-means objective `(1/2N) Σ_n min_k ‖x_n - w_k‖²` together with the
/// minimizing assignment.
pub fn kmeans_loss(x: &Matrix, head: &ClusterHead) -> Result<(f64, Assignment)> {
    let (assignment, total) = assign_with_loss(x, head)?;
    let loss = total / (2.0 * x.rows() as f64);
    Ok((loss, assignment))
}

/// Accumulates the k-means gradient into `head.grad_weights` and returns the
/// gradient with respect to `x`.
///
/// With `s(n)` the assigned cluster of point `n` and `N = x.rows()`:
/// `grad_w[k] += (1/N) Σ_{n: s(n)=k} (w_k - x_n)` and
/// `grad_x[n] = (1/N) (x_n - w_{s(n)})`. These are the exact gradients of
/// [`kmeans_loss`]; the optimizer applies the learning rate separately.
pub fn kmeans_backward(x: &Matrix, head: &mut ClusterHead, assignment: &Assignment) -> Result<Matrix> {
    if x.cols() != head.dim() {
        return Err(Error::ShapeMismatch {
            op: "kmeans_backward",
            left: x.shape(),
            right: head.weights.shape(),
        });
    }
    if assignment.cluster_of.len() != x.rows() || assignment.counts.len() != head.num_clusters() {
        return Err(Error::InvalidArgument {
            what: "assignment",
            details: format!(
                "stale assignment: {} points / {} clusters vs x {}x{} and K={}",
                assignment.cluster_of.len(),
                assignment.counts.len(),
                x.rows(),
                x.cols(),
                head.num_clusters()
            ),
        });
    }
    let inv_n = 1.0 / x.rows() as f64;
    let mut grad_x = Matrix::zeros(x.rows(), x.cols());
    for n in 0..x.rows() {
        let k = assignment.cluster_of[n];
        let point = x.row(n);
        let center = head.weights.row(k);
        for (j, (&p, &w)) in point.iter().zip(center).enumerate() {
            grad_x.set(n, j, inv_n * (p - w));
        }
        let gw = head.grad_weights.row_mut(k);
        for (j, (&p, &w)) in point.iter().zip(head.weights.row(k)).enumerate() {
            gw[j] += inv_n * (w - p);
        }
    }
    Ok(grad_x)
}

/// Sum of squares of all cluster-weight entries and its gradient `2w`.
///
/// The caller scales both by its regularization strength when combining loss
/// terms.
pub fn l2_reg(head: &ClusterHead) -> (f64, Matrix) {
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(head.num_clusters(), head.dim());
    for (g, &w) in grad.data_mut().iter_mut().zip(head.weights.data()) {
        loss += w * w;
        *g = 2.0 * w;
    }
    (loss, grad)
}

/// Mean pairwise absolute difference of cluster occupancy counts, normalized
/// by `N·K`. Zero means perfectly balanced clusters; the metric is monitored
/// during training and never differentiated.
pub fn balance_metric(assignment: &Assignment, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptyInput("balance_metric: N = 0"));
    }
    let total: usize = assignment.counts.iter().sum();
    if total != n {
        return Err(Error::InvalidArgument {
            what: "assignment counts",
            details: format!("counts sum to {total}, expected N = {n}"),
        });
    }
    let k = assignment.counts.len();
    let mut acc = 0u64;
    for a in 0..k {
        for b in (a + 1)..k {
            acc += assignment.counts[a].abs_diff(assignment.counts[b]) as u64;
        }
    }
    Ok(acc as f64 / (n as f64 * k as f64))
}
