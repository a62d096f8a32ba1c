//! End-to-end differentiable k-means: cluster means live as learnable
//! weights and train jointly with a feature embedding under a combined
//! foreground/background classification + clustering objective.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats, dataset
//! ingestion from disk, and the command-line front end live in the companion
//! `diffkmeans-cli` crate.
//!
//! Everything is seeded and deterministic: identical inputs, configuration,
//! and seed produce bitwise-identical parameters and histories.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod cluster;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
mod math;
pub mod matrix;
pub mod net;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod suite;
pub mod trainer;

pub use cluster::{
    assign, balance_metric, kmeans_backward, kmeans_loss, l2_reg, Assignment, ClusterHead,
    InitScheme,
};
pub use dataset::{
    downsample_background, gen_blobs, relabel_foreground, split, Dataset, Sample, SampleBatch,
    Standardizer,
};
pub use error::{Error, Result};
pub use eval::{confusion, evaluate_model, lloyd_kmeans, ConfusionReport, EvalReport, LloydOutcome};
pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::Matrix;
pub use net::{EmbeddingNet, ForwardCache};
pub use nn::{relu_backward, relu_forward, softmax_xent, AffineLayer};
pub use optim::{RmsProp, RmsState};
pub use pipeline::{run_experiment, ExperimentOutcome};
pub use suite::{run_gradient_suite, InstanceOutcome, SuiteConfig};
pub use trainer::{total_loss, train, EpochStats, LossComponents, TrainConfig, TrainHistory};
