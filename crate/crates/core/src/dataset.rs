//! Dataset generation and label plumbing.
//!
//! Training only ever sees [`SampleBatch`] values, which carry features and
//! foreground flags but no class labels; `hidden_class` exists solely for
//! evaluation and is stripped at the API boundary by construction.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{squared_distance, Matrix};

/// One labeled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Weak supervision: whether this sample is a candidate object.
    pub fg_flag: bool,
    /// True class id, readable only through evaluation paths.
    pub hidden_class: usize,
}

/// A batch as the trainer sees it: features and foreground flags only.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub features: Matrix,
    pub fg_flags: Vec<bool>,
}

impl SampleBatch {
    pub fn new(features: Matrix, fg_flags: Vec<bool>) -> Result<Self> {
        if features.rows() != fg_flags.len() {
            return Err(Error::ShapeMismatch {
                op: "sample_batch",
                left: features.shape(),
                right: (fg_flags.len(), 1),
            });
        }
        Ok(SampleBatch { features, fg_flags })
    }

    pub fn len(&self) -> usize {
        self.fg_flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fg_flags.is_empty()
    }

    pub fn foreground_count(&self) -> usize {
        self.fg_flags.iter().filter(|&&f| f).count()
    }

    /// Indices of foreground rows, in batch order.
    pub fn foreground_indices(&self) -> Vec<usize> {
        self.fg_flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    /// Copies the listed rows into a new batch.
    pub fn select(&self, indices: &[usize]) -> SampleBatch {
        SampleBatch {
            features: self.features.select_rows(indices),
            fg_flags: indices.iter().map(|&i| self.fg_flags[i]).collect(),
        }
    }
}

/// An immutable full dataset, including hidden evaluation labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::InvalidArgument {
                    what: "sample features",
                    details: format!("sample {i} has {} features, expected {dim}", s.features.len()),
                });
            }
        }
        Ok(Dataset { dim, samples })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn foreground_count(&self) -> usize {
        self.samples.iter().filter(|s| s.fg_flag).count()
    }

    /// Hidden class of every sample, for evaluation only.
    pub fn hidden_classes(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.hidden_class).collect()
    }

    /// The entire dataset as one trainer-visible batch (labels stripped).
    pub fn full_batch(&self) -> SampleBatch {
        let mut features = Matrix::zeros(self.samples.len(), self.dim);
        let mut fg_flags = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            features.row_mut(i).copy_from_slice(&s.features);
            fg_flags.push(s.fg_flag);
        }
        SampleBatch { features, fg_flags }
    }
}

/// A generated blob dataset together with the true foreground centers, which
/// evaluation code may compare against.
#[derive(Debug, Clone)]
pub struct Blobs {
    pub dataset: Dataset,
    pub fg_centers: Matrix,
}

/// Minimum distance enforced between the random unit vectors that place
/// foreground blob centers, so classes stay pairwise separated.
const MIN_CENTER_DIRECTION_GAP: f64 = 1.0;

/// Seeded synthetic data: `n_fg_classes` Gaussian blobs of `per_class`
/// foreground points centered at `separation · u_c` for random unit vectors
/// `u_c` (kept at least distance 1 apart so the classes are pairwise
/// separated), plus `n_bg` background points from the much broader
/// N(0, (2·separation)²).
pub fn gen_blobs(
    dim: usize,
    n_fg_classes: usize,
    n_bg: usize,
    per_class: usize,
    separation: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Blobs> {
    if dim == 0 {
        return Err(Error::InvalidArgument {
            what: "dim",
            details: "must be >= 1".into(),
        });
    }
    if n_fg_classes == 0 {
        return Err(Error::InvalidArgument {
            what: "n_fg_classes",
            details: "must be >= 1".into(),
        });
    }
    if separation <= 0.0 {
        return Err(Error::InvalidArgument {
            what: "separation",
            details: format!("must be > 0, got {separation}"),
        });
    }
    if noise_sigma <= 0.0 {
        return Err(Error::InvalidArgument {
            what: "noise_sigma",
            details: format!("must be > 0, got {noise_sigma}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Matrix::zeros(n_fg_classes, dim);
    for c in 0..n_fg_classes {
        let mut placed = false;
        'attempts: for _ in 0..200 {
            let mut direction = vec![0.0; dim];
            let mut norm_sq = 0.0;
            for d in &mut direction {
                let z: f64 = rng.sample(StandardNormal);
                *d = z;
                norm_sq += z * z;
            }
            if norm_sq < 1e-24 {
                continue;
            }
            let inv_norm = 1.0 / math::sqrt(norm_sq);
            for d in &mut direction {
                *d *= inv_norm;
            }
            for prev in 0..c {
                let mut prev_dir = centers.row(prev).to_vec();
                for p in &mut prev_dir {
                    *p /= separation;
                }
                if squared_distance(&prev_dir, &direction)
                    < MIN_CENTER_DIRECTION_GAP * MIN_CENTER_DIRECTION_GAP
                {
                    continue 'attempts;
                }
            }
            for (slot, d) in centers.row_mut(c).iter_mut().zip(&direction) {
                *slot = separation * d;
            }
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::InitFailure(format!(
                "could not place {n_fg_classes} separated blob centers in {dim} dimensions"
            )));
        }
    }

    let mut samples = Vec::with_capacity(n_fg_classes * per_class + n_bg);
    for c in 0..n_fg_classes {
        let center = centers.row(c).to_vec();
        for _ in 0..per_class {
            let mut features = Vec::with_capacity(dim);
            for &m in &center {
                let z: f64 = rng.sample(StandardNormal);
                features.push(m + noise_sigma * z);
            }
            samples.push(Sample {
                features,
                fg_flag: true,
                hidden_class: c,
            });
        }
    }
    let bg_sigma = 2.0 * separation;
    for _ in 0..n_bg {
        let mut features = Vec::with_capacity(dim);
        for _ in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            features.push(bg_sigma * z);
        }
        samples.push(Sample {
            features,
            fg_flag: false,
            hidden_class: n_fg_classes,
        });
    }

    Ok(Blobs {
        dataset: Dataset { dim, samples },
        fg_centers: centers,
    })
}

/// A raw labeled record before foreground relabeling (e.g. a decoded CIFAR-10
/// row).
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub label: usize,
    pub features: Vec<f64>,
}

/// Marks every record whose label is in `fg_classes` as foreground and keeps
/// the original label as the hidden evaluation class.
pub fn relabel_foreground(records: Vec<RawRecord>, fg_classes: &[usize]) -> Result<Dataset> {
    if fg_classes.is_empty() {
        return Err(Error::InvalidArgument {
            what: "fg_classes",
            details: "at least one foreground class is required".into(),
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("relabel_foreground: no records"));
    }
    for &c in fg_classes {
        if !records.iter().any(|r| r.label == c) {
            return Err(Error::InvalidArgument {
                what: "fg_classes",
                details: format!("class {c} does not occur in the dataset"),
            });
        }
    }
    let dim = records[0].features.len();
    let samples = records
        .into_iter()
        .map(|r| Sample {
            fg_flag: fg_classes.contains(&r.label),
            hidden_class: r.label,
            features: r.features,
        })
        .collect();
    Dataset::new(dim, samples)
}

/// Seeded shuffle followed by a prefix split; the first part receives
/// `round(fraction · N)` samples. The parts are disjoint and together carry
/// every sample exactly once.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument {
            what: "fraction",
            details: format!("must be in (0, 1), got {fraction}"),
        });
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let cut = libm::round(fraction * n as f64) as usize;
    let first = order[..cut]
        .iter()
        .map(|&i| dataset.samples[i].clone())
        .collect();
    let second = order[cut..]
        .iter()
        .map(|&i| dataset.samples[i].clone())
        .collect();
    Ok((
        Dataset {
            dim: dataset.dim,
            samples: first,
        },
        Dataset {
            dim: dataset.dim,
            samples: second,
        },
    ))
}

/// Keeps every foreground sample and a seeded `keep_fraction` share of the
/// background (1.0 keeps everything). Useful when background dwarfs the
/// foreground, as in CIFAR-10 with two foreground classes.
pub fn downsample_background(dataset: &Dataset, keep_fraction: f64, seed: u64) -> Result<Dataset> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument {
            what: "keep_fraction",
            details: format!("must be in (0, 1], got {keep_fraction}"),
        });
    }
    if keep_fraction == 1.0 {
        return Ok(dataset.clone());
    }
    let bg: Vec<usize> = dataset
        .samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| (!s.fg_flag).then_some(i))
        .collect();
    let mut order = bg.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let keep_count = libm::round(keep_fraction * bg.len() as f64) as usize;
    let mut keep: Vec<bool> = dataset.samples.iter().map(|s| s.fg_flag).collect();
    for &i in order.iter().take(keep_count) {
        keep[i] = true;
    }
    let samples = dataset
        .samples
        .iter()
        .zip(&keep)
        .filter(|&(_s, &k)| k).map(|(s, &_k)| s.clone())
        .collect();
    Ok(Dataset {
        dim: dataset.dim,
        samples,
    })
}

/// Per-dimension affine normalization fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    /// Fits mean and standard deviation per dimension. Dimensions with
    /// (near-)zero variance keep a unit scale instead of dividing by zero.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("standardizer fit"));
        }
        let n = train.len() as f64;
        let dim = train.dim;
        let mut mean = vec![0.0; dim];
        for s in &train.samples {
            for (m, &x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for s in &train.samples {
            for (v, (&x, &m)) in var.iter_mut().zip(s.features.iter().zip(&mean)) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var
            .iter()
            .map(|&v| {
                let s = math::sqrt(v / n);
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::ShapeMismatch {
                op: "standardizer",
                left: (1, mean.len()),
                right: (1, std.len()),
            });
        }
        if std.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument {
                what: "standardizer std",
                details: "all scales must be > 0".into(),
            });
        }
        Ok(Standardizer { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.dim != self.mean.len() {
            return Err(Error::ShapeMismatch {
                op: "standardize",
                left: (dataset.len(), dataset.dim),
                right: (1, self.mean.len()),
            });
        }
        let samples = dataset
            .samples
            .iter()
            .map(|s| {
                let features = s
                    .features
                    .iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(&x, (&m, &sd))| (x - m) / sd)
                    .collect();
                Sample {
                    features,
                    fg_flag: s.fg_flag,
                    hidden_class: s.hidden_class,
                }
            })
            .collect();
        Ok(Dataset {
            dim: dataset.dim,
            samples,
        })
    }
}

/// CSV header used when exporting generated datasets.
pub fn csv_header(dim: usize) -> String {
    let mut header = String::from("hidden_class,fg_flag");
    for d in 0..dim {
        header.push_str(&format!(",f_{d}"));
    }
    header
}
