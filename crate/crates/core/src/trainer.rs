//! One-epoch training and normalized-entropy (NE) evaluation.
//!
//! NE is the mean log loss divided by the entropy of the background click
//! rate `p̄` of the evaluation set:
//!
//! ```text
//! NE = -(1/N) Σ (y ln p + (1 - y) ln(1 - p))  /  -(p̄ ln p̄ + (1 - p̄) ln(1 - p̄))
//! ```
//!
//! A constant predictor at `p̄` scores exactly 1.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dlrm::{build_model, count_flops, log_loss, DlrmConfig, Gradients, IndexPolicy, Model, OptimizerConfig};
use crate::math;
use crate::seed::{self, purpose};
use crate::synthgen::{Sample, Split, Teacher};
use crate::{Error, Result};

/// Evaluation streams are scored in chunks of this many samples.
const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub eval_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch_size: 256, eval_size: 50_000 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be at least 1"));
        }
        if self.eval_size == 0 {
            return Err(Error::config("train.eval_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// Streaming accumulator for NE.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeAccumulator {
    loss_sum: f64,
    clicks: u64,
    count: u64,
}

impl NeAccumulator {
    pub fn push(&mut self, p: f64, label: bool) {
        self.loss_sum += log_loss(p, label);
        self.clicks += label as u64;
        self.count += 1;
    }

    pub fn finish(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::Domain("NE of an empty evaluation set".into()));
        }
        let ctr = self.clicks as f64 / self.count as f64;
        if self.clicks == 0 || self.clicks == self.count {
            return Err(Error::Domain(format!("NE undefined: background CTR is {ctr}")));
        }
        let entropy = -(ctr * math::ln(ctr) + (1.0 - ctr) * math::ln(1.0 - ctr));
        Ok((self.loss_sum / self.count as f64) / entropy)
    }
}

/// NE of predictions `probs` against `labels`.
pub fn normalized_entropy(probs: &[f64], labels: &[bool]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Input(format!("{} predictions for {} labels", probs.len(), labels.len())));
    }
    let mut acc = NeAccumulator::default();
    for (&p, &y) in probs.iter().zip(labels) {
        acc.push(p, y);
    }
    acc.finish()
}

/// NE of `model` on `eval`. Sparse indices are hashed into table range.
pub fn evaluate_ne(model: &mut Model, eval: &[Sample]) -> Result<f64> {
    let mut acc = NeAccumulator::default();
    for chunk in eval.chunks(EVAL_CHUNK) {
        let probs = model.forward_with(chunk, IndexPolicy::Modulo)?;
        for (p, s) in probs.into_iter().zip(chunk) {
            acc.push(p, s.label);
        }
    }
    acc.finish()
}

/// `ne / ne_min`, with `ne_min` the smallest NE of an experiment collection.
pub fn normalize_loss(ne: f64, ne_min: f64) -> Result<f64> {
    if ne_min.is_nan() || ne_min <= 0.0 {
        return Err(Error::Domain(format!("ne_min must be positive, got {ne_min}")));
    }
    Ok(ne / ne_min)
}

/// Which data a run trains on and is evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataSpec {
    pub master_seed: u64,
    pub data_size: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// NE on a fresh stream from the training population.
    pub train_ne: f64,
    /// NE on the held-out population.
    pub test_ne: f64,
    pub examples_seen: u64,
    pub flops_total: u64,
}

/// Error from a run that started but did not finish.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub examples_seen: u64,
    pub error: Error,
}

/// Trains a freshly built model for one pass over the first `data_size`
/// samples of the training stream, then scores it on `eval_size` samples of
/// a fresh training-population stream and of the held-out stream.
///
/// All streams and the initialization derive from `data.master_seed`, so the
/// outcome is a pure function of the arguments.
pub fn train_one_epoch(
    config: &DlrmConfig,
    teacher: &Teacher,
    data: DataSpec,
    opt: &OptimizerConfig,
    train: &TrainConfig,
) -> Result<TrainOutcome, RunFailure> {
    let fail = |examples_seen, error| RunFailure { examples_seen, error };
    let setup = || -> Result<(Model, u64)> {
        opt.validate()?;
        train.validate()?;
        if config.tables.len() != teacher.schema().tables.len() || config.num_dense != teacher.schema().num_dense {
            return Err(Error::config("model", "does not match the feature schema"));
        }
        let flops = count_flops(config)?;
        let model = build_model(config, seed::derive(data.master_seed, purpose::MODEL_INIT))?;
        Ok((model, flops.train_per_example))
    };
    let (mut model, train_flops) = setup().map_err(|e| fail(0, e))?;

    let mut grads = Gradients::zeros(config);
    let mut stream = teacher.stream(seed::derive(data.master_seed, purpose::TRAIN_STREAM), Split::Train);
    let mut batch: Vec<Sample> = Vec::with_capacity(train.batch_size);
    let mut seen = 0u64;
    while seen < data.data_size {
        let take = (data.data_size - seen).min(train.batch_size as u64) as usize;
        batch.clear();
        batch.extend(stream.by_ref().take(take));
        model
            .loss_and_backward_into(&batch, IndexPolicy::Modulo, &mut grads)
            .and_then(|_| model.sgd_step(&grads, opt))
            .map_err(|e| fail(seen, e))?;
        seen += take as u64;
    }

    let mut score = |seed_purpose, split| -> Result<f64> {
        let mut acc = NeAccumulator::default();
        let mut stream = teacher.stream(seed::derive(data.master_seed, seed_purpose), split);
        let mut left = train.eval_size;
        while left > 0 {
            let n = left.min(EVAL_CHUNK);
            let chunk: Vec<Sample> = stream.by_ref().take(n).collect();
            for (p, s) in model.forward_with(&chunk, IndexPolicy::Modulo)?.into_iter().zip(&chunk) {
                acc.push(p, s.label);
            }
            left -= n;
        }
        acc.finish()
    };
    let train_ne = score(purpose::TRAIN_EVAL_STREAM, Split::Train).map_err(|e| fail(seen, e))?;
    let test_ne = score(purpose::TEST_STREAM, Split::Test).map_err(|e| fail(seen, e))?;

    Ok(TrainOutcome { model, train_ne, test_ne, examples_seen: seen, flops_total: train_flops * seen })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_derived_ne() {
        let ne = normalized_entropy(&[0.8, 0.2], &[true, false]).unwrap();
        let expected = -libm::log(0.8) / libm::log(2.0);
        assert!((ne - expected).abs() < 1e-15);
        assert!((ne - 0.321928).abs() < 1e-6);
    }

    #[test]
    fn background_predictor_scores_one() {
        let labels = [true, false, false, false, true, false, false, false];
        let probs = [0.25; 8];
        let ne = normalized_entropy(&probs, &labels).unwrap();
        assert!((ne - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_perfect_predictions_approach_zero() {
        let ne = normalized_entropy(&[1.0, 0.0, 1.0], &[true, false, true]).unwrap();
        assert!(ne < 1e-5);
    }

    #[test]
    fn degenerate_labels_are_undefined() {
        assert!(matches!(normalized_entropy(&[0.5, 0.5], &[true, true]), Err(Error::Domain(_))));
        assert!(matches!(normalized_entropy(&[0.5], &[false]), Err(Error::Domain(_))));
        assert!(matches!(normalized_entropy(&[], &[]), Err(Error::Domain(_))));
        assert!(matches!(normalized_entropy(&[0.5], &[]), Err(Error::Input(_))));
    }

    #[test]
    fn normalize_loss_examples() {
        assert_eq!(normalize_loss(0.4, 0.4).unwrap(), 1.0);
        assert!((normalize_loss(0.5, 0.4).unwrap() - 1.25).abs() < 1e-15);
        assert!(normalize_loss(0.5, 0.0).is_err());
        assert!(normalize_loss(0.5, -1.0).is_err());
    }
}
