//! The full experiment pipeline over an in-memory dataset: split,
//! standardize on the training half, train, evaluate on the held-out half.

use crate::dataset::{split, Dataset, Standardizer};
use crate::error::Result;
use crate::eval::{evaluate_model, EvalReport};
use crate::trainer::{train, TrainConfig, TrainOutcome};

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub model: TrainOutcome,
    pub eval: EvalReport,
    /// Normalization fitted on the training split; required to embed new
    /// data with the trained network.
    pub standardizer: Standardizer,
    pub train_set: Dataset,
    pub test_set: Dataset,
}

/// Splits `dataset` (the held-out share is `test_fraction`), standardizes
/// per dimension on the training split, trains, and evaluates on the test
/// split. Deterministic given `(dataset, cfg, test_fraction)`.
pub fn run_experiment(
    dataset: &Dataset,
    cfg: &TrainConfig,
    test_fraction: f64,
) -> Result<ExperimentOutcome> {
    let (train_raw, test_raw) = split(dataset, 1.0 - test_fraction, cfg.seed)?;
    let standardizer = Standardizer::fit(&train_raw)?;
    let train_set = standardizer.apply(&train_raw)?;
    let test_set = standardizer.apply(&test_raw)?;

    let model = train(&train_set.full_batch(), cfg)?;
    let eval = evaluate_model(&model.net, &model.head, &test_set)?;
    Ok(ExperimentOutcome {
        model,
        eval,
        standardizer,
        train_set,
        test_set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::gen_blobs;

    #[test]
    fn experiment_is_deterministic_end_to_end() {
        let blobs = gen_blobs(8, 2, 40, 20, 10.0, 0.5, 3).unwrap();
        let cfg = TrainConfig {
            k: 2,
            hidden_dims: alloc::vec![16, 8],
            epochs: 4,
            batch_size: 16,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = run_experiment(&blobs.dataset, &cfg, 0.25).unwrap();
        let b = run_experiment(&blobs.dataset, &cfg, 0.25).unwrap();
        assert_eq!(a.model.history, b.model.history);
        assert_eq!(a.model.head.weights(), b.model.head.weights());
        assert_eq!(a.test_set, b.test_set);
    }
}
