//! The combined training objective and the seeded mini-batch RMSProp loop.
//!
//! The loss is `L = L_k + α_r·L_2 + α_c·L_C`: the k-means term over
//! foreground embeddings, L2 regularization of the cluster weights, and
//! cross-entropy of the foreground/background classifier over the whole
//! batch. Background samples are forwarded (the classifier needs them) but
//! masked out of the clustering term and its gradients.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::{assign, balance_metric, kmeans_backward, kmeans_loss, l2_reg, ClusterHead, InitScheme};
use crate::dataset::SampleBatch;
use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};
use crate::net::EmbeddingNet;
use crate::nn::softmax_xent;
use crate::optim::{RmsProp, RmsState};

/// Hyperparameters for a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the L2 regularization term.
    pub alpha_r: f64,
    /// Weight of the classification cross-entropy term.
    pub alpha_c: f64,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
    /// Number of clusters.
    pub k: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Widths of the affine+ReLU pairs; the last entry is the embedding
    /// dimension.
    pub hidden_dims: Vec<usize>,
    pub cluster_init: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            // 0.25 shrinks the cluster weights faster than the embedding can
            // follow and the whole foreground representation contracts to the
            // origin; at this scale the L2 term needs weight-decay magnitude.
            alpha_r: 0.001,
            alpha_c: 1.0,
            learning_rate: 0.045,
            rms_decay: 0.9,
            momentum: 0.9,
            epsilon: 1.0,
            k: 2,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            hidden_dims: vec![128, 64],
            cluster_init: InitScheme::FarthestPoint,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument {
                what: "batch_size",
                details: "must be >= 1".into(),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument {
                what: "epochs",
                details: "must be >= 1".into(),
            });
        }
        if self.k < 2 {
            return Err(Error::InvalidArgument {
                what: "k",
                details: format!("must be >= 2, got {}", self.k),
            });
        }
        if self.alpha_r < 0.0 || self.alpha_c < 0.0 {
            return Err(Error::InvalidArgument {
                what: "loss weights",
                details: "alpha_r and alpha_c must be >= 0".into(),
            });
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Result<RmsProp> {
        RmsProp::new(self.learning_rate, self.rms_decay, self.momentum, self.epsilon)
    }
}

/// Per-term breakdown of the combined objective over one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents {
    /// `kmeans + alpha_r * l2 + alpha_c * xent`.
    pub total: f64,
    /// Foreground k-means term; 0 when the batch has no foreground samples.
    pub kmeans: f64,
    /// Unweighted L2 of the cluster weights.
    pub l2: f64,
    /// Unweighted classifier cross-entropy over the full batch.
    pub xent: f64,
    /// Occupancy balance of the foreground assignment; monitoring only.
    pub balance: f64,
    /// Number of foreground samples in the batch.
    pub foreground: usize,
}

/// Evaluates the combined loss without touching gradient buffers.
pub fn total_loss(
    batch: &SampleBatch,
    net: &EmbeddingNet,
    head: &ClusterHead,
    cfg: &TrainConfig,
) -> Result<LossComponents> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("total_loss batch"));
    }
    let cache = net.forward(&batch.features)?;
    let (xent, _) = softmax_xent(&cache.logits, &batch.fg_flags)?;
    let fg = batch.foreground_indices();
    let (kmeans, balance) = if fg.is_empty() {
        (0.0, 0.0)
    } else {
        let fg_embed = cache.embedding.select_rows(&fg);
        let (lk, assignment) = kmeans_loss(&fg_embed, head)?;
        (lk, balance_metric(&assignment, fg.len())?)
    };
    let (l2, _) = l2_reg(head);
    Ok(LossComponents {
        total: kmeans + cfg.alpha_r * l2 + cfg.alpha_c * xent,
        kmeans,
        l2,
        xent,
        balance,
        foreground: fg.len(),
    })
}

/// Evaluates the combined loss and accumulates its gradients into the
/// parameter buffers of `net` and `head` (zeroing them first).
pub fn loss_and_gradients(
    batch: &SampleBatch,
    net: &mut EmbeddingNet,
    head: &mut ClusterHead,
    cfg: &TrainConfig,
) -> Result<LossComponents> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("total_loss batch"));
    }
    net.zero_grad();
    head.zero_grad();

    let cache = net.forward(&batch.features)?;
    let (xent, mut grad_logits) = softmax_xent(&cache.logits, &batch.fg_flags)?;
    for g in grad_logits.data_mut() {
        *g *= cfg.alpha_c;
    }

    let fg = batch.foreground_indices();
    let mut grad_embedding = Matrix::zeros(cache.embedding.rows(), cache.embedding.cols());
    let (kmeans, balance) = if fg.is_empty() {
        (0.0, 0.0)
    } else {
        let fg_embed = cache.embedding.select_rows(&fg);
        let (lk, assignment) = kmeans_loss(&fg_embed, head)?;
        let grad_fg = kmeans_backward(&fg_embed, head, &assignment)?;
        for (local, &row) in fg.iter().enumerate() {
            grad_embedding.row_mut(row).copy_from_slice(grad_fg.row(local));
        }
        (lk, balance_metric(&assignment, fg.len())?)
    };

    let (l2, l2_grad) = l2_reg(head);
    for (g, &r) in head.grad_weights_mut().data_mut().iter_mut().zip(l2_grad.data()) {
        *g += cfg.alpha_r * r;
    }

    net.backward(&cache, &grad_embedding, &grad_logits)?;

    Ok(LossComponents {
        total: kmeans + cfg.alpha_r * l2 + cfg.alpha_c * xent,
        kmeans,
        l2,
        xent,
        balance,
        foreground: fg.len(),
    })
}

/// Fraction of samples whose foreground/background prediction matches the
/// flag. Column 1 of the logits is the foreground score.
pub fn classifier_accuracy(net: &EmbeddingNet, batch: &SampleBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("classifier_accuracy batch"));
    }
    let embedded = net.embed(&batch.features)?;
    let logits = net.classifier().forward(&embedded)?;
    let mut correct = 0usize;
    for (i, &flag) in batch.fg_flags.iter().enumerate() {
        let row = logits.row(i);
        let predicted_fg = row[1] > row[0];
        if predicted_fg == flag {
            correct += 1;
        }
    }
    Ok(correct as f64 / batch.len() as f64)
}

/// One row of the training history, recorded at the end of every epoch over
/// the full training set.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub kmeans: f64,
    pub l2: f64,
    pub xent: f64,
    pub balance: f64,
    pub fg_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Pre-training baseline, recorded as epoch 0.
    pub initial: Option<EpochStats>,
    pub epochs: Vec<EpochStats>,
    /// Non-fatal anomalies observed during the run (e.g. a degenerate
    /// dataset with only one kind of flag).
    pub warnings: Vec<String>,
}

impl TrainHistory {
    /// Epoch-0 baseline followed by one row per trained epoch.
    pub fn rows(&self) -> impl Iterator<Item = &EpochStats> {
        self.initial.iter().chain(self.epochs.iter())
    }
}

/// A trained model: the embedding network, the cluster head, and the
/// per-epoch history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: EmbeddingNet,
    pub head: ClusterHead,
    pub history: TrainHistory,
}

/// Runs seeded mini-batch RMSProp over the combined objective.
///
/// Identical `(data, cfg)` pairs produce bitwise-identical weights and
/// histories. Clusters that end an epoch with zero assigned foreground
/// samples are re-seeded to the worst-fit foreground embedding (the same
/// rule Lloyd's baseline uses for empty clusters) so the head cannot park
/// unused capacity away from the data.
pub fn train(data: &SampleBatch, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("train dataset"));
    }

    let mut history = TrainHistory::default();
    let fg_total = data.foreground_count();
    if fg_total == 0 {
        history
            .warnings
            .push("dataset has no foreground samples; clustering term is inert".into());
    }
    if fg_total == data.len() {
        history
            .warnings
            .push("dataset has no background samples; classifier sees one class".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = EmbeddingNet::init(data.features.cols(), &cfg.hidden_dims, &mut rng)?;
    let head_seed: u64 = rng.random();

    let fg_rows = data.foreground_indices();
    let mut head = if cfg.cluster_init == InitScheme::RandomNormal || fg_rows.is_empty() {
        if cfg.cluster_init != InitScheme::RandomNormal {
            history.warnings.push(
                "point-based cluster init has no foreground points; falling back to random_normal"
                    .into(),
            );
        }
        ClusterHead::init(net.embed_dim(), cfg.k, head_seed, InitScheme::RandomNormal, None)?
    } else {
        let points = net.embed(&data.features.select_rows(&fg_rows))?;
        ClusterHead::init(net.embed_dim(), cfg.k, head_seed, cfg.cluster_init, Some(&points))?
    };

    let opt = cfg.optimizer()?;
    let mut states = OptStates::new(&net, &head);

    let baseline = total_loss(data, &net, &head, cfg)?;
    history.initial = Some(EpochStats {
        epoch: 0,
        total: baseline.total,
        kmeans: baseline.kmeans,
        l2: baseline.l2,
        xent: baseline.xent,
        balance: baseline.balance,
        fg_accuracy: classifier_accuracy(&net, data)?,
    });

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select(chunk);
            let components = loss_and_gradients(&batch, &mut net, &mut head, cfg)?;
            if !components.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            states.step(&opt, &mut net, &mut head)?;
        }

        let components = total_loss(data, &net, &head, cfg)?;
        if !components.total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.epochs.push(EpochStats {
            epoch,
            total: components.total,
            kmeans: components.kmeans,
            l2: components.l2,
            xent: components.xent,
            balance: components.balance,
            fg_accuracy: classifier_accuracy(&net, data)?,
        });

        if epoch < cfg.epochs && !fg_rows.is_empty() {
            rescue_starved_clusters(data, &fg_rows, &net, &mut head, &mut states)?;
        }
    }

    Ok(TrainOutcome { net, head, history })
}

/// Re-seeds clusters with zero assigned foreground samples onto the
/// foreground embedding farthest from its assigned cluster weight.
fn rescue_starved_clusters(
    data: &SampleBatch,
    fg_rows: &[usize],
    net: &EmbeddingNet,
    head: &mut ClusterHead,
    states: &mut OptStates,
) -> Result<()> {
    let embedded = net.embed(&data.features.select_rows(fg_rows))?;
    let mut assignment = assign(&embedded, head)?;
    let mut used = vec![false; embedded.rows()];
    for k in 0..head.num_clusters() {
        if assignment.counts[k] > 0 {
            continue;
        }
        let mut worst: Option<(usize, f64)> = None;
        for n in 0..embedded.rows() {
            if used[n] {
                continue;
            }
            let center = head.weights().row(assignment.cluster_of[n]);
            let d = squared_distance(embedded.row(n), center);
            if worst.is_none_or(|(_, best)| d > best) {
                worst = Some((n, d));
            }
        }
        let Some((point, _)) = worst else { break };
        used[point] = true;
        head.weights_mut().row_mut(k).copy_from_slice(embedded.row(point));
        states.head.reset_row(k, head.dim());
        assignment = assign(&embedded, head)?;
    }
    Ok(())
}

/// RMSProp accumulators for every trainable tensor, in a fixed order.
struct OptStates {
    layer_weights: Vec<RmsState>,
    layer_biases: Vec<RmsState>,
    classifier_weight: RmsState,
    classifier_bias: RmsState,
    head: RmsState,
}

impl OptStates {
    fn new(net: &EmbeddingNet, head: &ClusterHead) -> Self {
        OptStates {
            layer_weights: net
                .layers()
                .iter()
                .map(|l| RmsState::new(l.weight().data().len()))
                .collect(),
            layer_biases: net
                .layers()
                .iter()
                .map(|l| RmsState::new(l.bias().len()))
                .collect(),
            classifier_weight: RmsState::new(net.classifier().weight().data().len()),
            classifier_bias: RmsState::new(net.classifier().bias().len()),
            head: RmsState::new(head.weights().data().len()),
        }
    }

    fn step(&mut self, opt: &RmsProp, net: &mut EmbeddingNet, head: &mut ClusterHead) -> Result<()> {
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            let (w, gw) = layer.weight_param();
            opt.step(w, gw, &mut self.layer_weights[i])?;
            let (b, gb) = layer.bias_param();
            opt.step(b, gb, &mut self.layer_biases[i])?;
        }
        let (w, gw) = net.classifier_mut().weight_param();
        opt.step(w, gw, &mut self.classifier_weight)?;
        let (b, gb) = net.classifier_mut().bias_param();
        opt.step(b, gb, &mut self.classifier_bias)?;
        let (hw, hg) = head.weights_and_grad();
        opt.step(hw, hg, &mut self.head)?;
        Ok(())
    }
}
