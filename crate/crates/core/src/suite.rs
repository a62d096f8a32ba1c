//! Finite-difference verification of the full training objective: random
//! small instances are generated, degenerate ones (assignment ties, ReLU
//! kinks) are skipped with a notice, and every remaining parameter gradient
//! is compared against central differences.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cluster::ClusterHead;
use crate::dataset::SampleBatch;
use crate::error::{Error, Result};
use crate::gradcheck::grad_check;
use crate::matrix::{squared_distance, Matrix};
use crate::net::EmbeddingNet;
use crate::trainer::{loss_and_gradients, total_loss, TrainConfig};

/// Margin a candidate instance must keep from ReLU kinks and assignment ties
/// for central differences at ε = 1e-4 to be trustworthy.
const DEGENERACY_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Number of checked (non-skipped) instances to produce.
    pub instances: usize,
    pub max_samples: usize,
    pub max_dim: usize,
    pub k_choices: Vec<usize>,
    pub hidden_dims: Vec<usize>,
    pub epsilon: f64,
    pub seed: u64,
    /// Test hook: corrupt one analytic gradient entry so the failure path can
    /// be exercised end to end.
    pub corrupt: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            instances: 20,
            max_samples: 8,
            max_dim: 6,
            k_choices: vec![2, 3],
            hidden_dims: vec![5, 4],
            epsilon: 1e-4,
            seed: 0,
            corrupt: false,
        }
    }
}

/// Why a candidate instance was not checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Some foreground point was within the margin of an assignment tie.
    AssignmentTie,
    /// Some pre-activation was within the margin of the ReLU kink.
    ReluKink,
}

#[derive(Debug, Clone)]
pub enum InstanceOutcome {
    Checked(CheckedInstance),
    Skipped {
        samples: usize,
        dim: usize,
        k: usize,
        reason: SkipReason,
    },
}

#[derive(Debug, Clone)]
pub struct CheckedInstance {
    pub samples: usize,
    pub dim: usize,
    pub k: usize,
    pub max_rel_error: f64,
    /// Parameter entry with the worst relative error, e.g. `layers.0.weight[2,3]`.
    pub worst_param: String,
    pub analytic: f64,
    pub numeric: f64,
}

/// Generates random instances and gradient-checks the full objective
/// (classifier, every hidden layer, and the cluster weights) until
/// `cfg.instances` instances have been checked. Skipped candidates are
/// reported, not retried silently.
pub fn run_gradient_suite(cfg: &SuiteConfig) -> Result<Vec<InstanceOutcome>> {
    if cfg.instances == 0 || cfg.max_samples < 2 || cfg.max_dim < 2 {
        return Err(Error::InvalidArgument {
            what: "suite config",
            details: "need instances >= 1, max_samples >= 2, max_dim >= 2".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut outcomes = Vec::new();
    let mut checked = 0usize;
    let mut attempts = 0usize;
    let budget = cfg.instances * 50;
    while checked < cfg.instances {
        attempts += 1;
        if attempts > budget {
            return Err(Error::InvalidArgument {
                what: "suite budget",
                details: format!("{attempts} candidates produced only {checked} checkable instances"),
            });
        }
        let outcome = check_one_instance(cfg, &mut rng)?;
        if matches!(outcome, InstanceOutcome::Checked(_)) {
            checked += 1;
        }
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn check_one_instance(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<InstanceOutcome> {
    let n = rng.random_range(2..=cfg.max_samples);
    let d = rng.random_range(2..=cfg.max_dim);
    let k = cfg.k_choices[rng.random_range(0..cfg.k_choices.len())];

    // Feature scale well above the init scale keeps pre-activations away
    // from the ReLU kink for most candidates.
    let mut features = Matrix::zeros(n, d);
    for v in features.data_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = 2.0 * z;
    }
    // Guarantee a mixed batch: at least one foreground and one background row.
    let mut fg_flags: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    fg_flags[0] = true;
    if n > 1 {
        fg_flags[1] = false;
    }
    let batch = SampleBatch::new(features, fg_flags)?;

    let mut net = EmbeddingNet::init(d, &cfg.hidden_dims, rng)?;
    let mut head = {
        let mut weights = Matrix::zeros(k, net.embed_dim());
        for v in weights.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = 0.3 * z;
        }
        ClusterHead::from_weights(weights)?
    };

    let train_cfg = TrainConfig {
        k,
        hidden_dims: cfg.hidden_dims.clone(),
        ..TrainConfig::default()
    };

    if let Some(reason) = degeneracy(&batch, &net, &head)? {
        return Ok(InstanceOutcome::Skipped {
            samples: n,
            dim: d,
            k,
            reason,
        });
    }

    loss_and_gradients(&batch, &mut net, &mut head, &train_cfg)?;
    let mut analytic = flatten_grads(&net, &head);
    if cfg.corrupt {
        analytic[0] += 1.0;
    }
    let at = flatten_params(&net, &head);
    let p = at.len();

    let base_net = net.clone();
    let base_head = head.clone();
    let loss = |m: &Matrix| -> Result<f64> {
        let mut probe_net = base_net.clone();
        let mut probe_head = base_head.clone();
        write_params(&mut probe_net, &mut probe_head, m.data());
        Ok(total_loss(&batch, &probe_net, &probe_head, &train_cfg)?.total)
    };
    let report = grad_check(
        loss,
        &Matrix::from_vec(1, p, analytic)?,
        &Matrix::from_vec(1, p, at)?,
        cfg.epsilon,
    )?;

    Ok(InstanceOutcome::Checked(CheckedInstance {
        samples: n,
        dim: d,
        k,
        max_rel_error: report.max_rel_error,
        worst_param: param_name(&net, &head, report.worst_index.1),
        analytic: report.analytic,
        numeric: report.numeric,
    }))
}

/// Checks whether the instance sits too close to a ReLU kink or an
/// assignment tie for finite differences to be valid.
fn degeneracy(
    batch: &SampleBatch,
    net: &EmbeddingNet,
    head: &ClusterHead,
) -> Result<Option<SkipReason>> {
    let cache = net.forward(&batch.features)?;
    for pre in &cache.pre_activations {
        if pre.data().iter().any(|v| v.abs() <= DEGENERACY_MARGIN) {
            return Ok(Some(SkipReason::ReluKink));
        }
    }
    let fg = batch.foreground_indices();
    if !fg.is_empty() {
        let embedded = cache.embedding.select_rows(&fg);
        for n in 0..embedded.rows() {
            let point = embedded.row(n);
            let mut best = f64::INFINITY;
            let mut second = f64::INFINITY;
            for c in 0..head.num_clusters() {
                let dist = squared_distance(point, head.weights().row(c));
                if dist < best {
                    second = best;
                    best = dist;
                } else if dist < second {
                    second = dist;
                }
            }
            if second - best <= DEGENERACY_MARGIN {
                return Ok(Some(SkipReason::AssignmentTie));
            }
        }
    }
    Ok(None)
}

/// Flat parameter vector in the fixed order: each pair's weight then bias,
/// classifier weight then bias, cluster weights.
pub fn flatten_params(net: &EmbeddingNet, head: &ClusterHead) -> Vec<f64> {
    let mut flat = Vec::new();
    for layer in net.layers() {
        flat.extend_from_slice(layer.weight().data());
        flat.extend_from_slice(layer.bias());
    }
    flat.extend_from_slice(net.classifier().weight().data());
    flat.extend_from_slice(net.classifier().bias());
    flat.extend_from_slice(head.weights().data());
    flat
}

/// Flat gradient vector in the same order as [`flatten_params`].
pub fn flatten_grads(net: &EmbeddingNet, head: &ClusterHead) -> Vec<f64> {
    let mut flat = Vec::new();
    for layer in net.layers() {
        flat.extend_from_slice(layer.grad_weight().data());
        flat.extend_from_slice(layer.grad_bias());
    }
    flat.extend_from_slice(net.classifier().grad_weight().data());
    flat.extend_from_slice(net.classifier().grad_bias());
    flat.extend_from_slice(head.grad_weights().data());
    flat
}

/// Writes a flat vector produced by [`flatten_params`] back into the model.
pub fn write_params(net: &mut EmbeddingNet, head: &mut ClusterHead, flat: &[f64]) {
    let mut cursor = 0usize;
    let mut take = |len: usize| {
        let slice = &flat[cursor..cursor + len];
        cursor += len;
        slice
    };
    for layer in net.layers_mut() {
        let len = layer.weight().data().len();
        layer.weight_mut().data_mut().copy_from_slice(take(len));
        let len = layer.bias().len();
        layer.bias_mut().copy_from_slice(take(len));
    }
    let len = net.classifier().weight().data().len();
    net.classifier_mut().weight_mut().data_mut().copy_from_slice(take(len));
    let len = net.classifier().bias().len();
    net.classifier_mut().bias_mut().copy_from_slice(take(len));
    let len = head.weights().data().len();
    head.weights_mut().data_mut().copy_from_slice(take(len));
    debug_assert_eq!(cursor, flat.len());
}

/// Human-readable name of the flat parameter index, for failure reports.
pub fn param_name(net: &EmbeddingNet, head: &ClusterHead, mut index: usize) -> String {
    for (i, layer) in net.layers().iter().enumerate() {
        let w = layer.weight().data().len();
        if index < w {
            return format!("layers.{i}.weight[{},{}]", index / layer.weight().cols(), index % layer.weight().cols());
        }
        index -= w;
        let b = layer.bias().len();
        if index < b {
            return format!("layers.{i}.bias[{index}]");
        }
        index -= b;
    }
    let w = net.classifier().weight().data().len();
    if index < w {
        return format!(
            "classifier.weight[{},{}]",
            index / net.classifier().weight().cols(),
            index % net.classifier().weight().cols()
        );
    }
    index -= w;
    let b = net.classifier().bias().len();
    if index < b {
        return format!("classifier.bias[{index}]");
    }
    index -= b;
    format!("clusters.weight[{},{}]", index / head.dim(), index % head.dim())
}
