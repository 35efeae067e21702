//! Deterministic synthetic CTR data.
//!
//! A hidden logistic [`Teacher`] labels impressions made of standard-normal
//! dense features and Zipf-distributed categorical (sparse) features. Streams
//! are pure functions of `(schema, teacher, seed)` and grow by appending, so
//! the first `k` samples of a long stream are exactly the stream of length
//! `k`. Growing data sizes therefore form nested subsets.
//!
//! The held-out population ([`Split::Test`]) keeps the label function but
//! flattens category popularity by `test_zipf_shift`, a mild covariate shift
//! between training and test traffic.

mod zipf;

use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use zipf::Zipf;

use crate::math;
use crate::seed::{self, purpose};
use crate::{Error, Result};

/// Number of samples used to calibrate the teacher's bias.
pub const CALIBRATION_SAMPLES: usize = 100_000;
/// Largest tolerated gap between calibrated and target click rate.
pub const CALIBRATION_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTableSpec {
    pub vocab_size: u32,
    /// Active indices per sample; 1 means one-hot.
    pub hots: u32,
    pub zipf_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub num_dense: usize,
    pub tables: Vec<SparseTableSpec>,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        if self.num_dense == 0 {
            return Err(Error::config("schema.num_dense", "must be at least 1"));
        }
        if self.tables.is_empty() {
            return Err(Error::config("schema.tables", "at least one sparse table is required"));
        }
        for (t, spec) in self.tables.iter().enumerate() {
            if spec.vocab_size == 0 {
                return Err(Error::config(format!("schema.tables[{t}].vocab_size"), "must be at least 1"));
            }
            if spec.hots == 0 {
                return Err(Error::config(format!("schema.tables[{t}].hots"), "must be at least 1"));
            }
            if spec.hots > spec.vocab_size {
                return Err(Error::config(
                    format!("schema.tables[{t}].hots"),
                    format!("{} exceeds vocab_size {}", spec.hots, spec.vocab_size),
                ));
            }
            if !(spec.zipf_exponent.is_finite() && spec.zipf_exponent >= 0.0) {
                return Err(Error::config(
                    format!("schema.tables[{t}].zipf_exponent"),
                    "must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    pub fn total_hots(&self) -> usize {
        self.tables.iter().map(|t| t.hots as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherSpec {
    pub seed: u64,
    /// Desired background click rate, strictly inside (0, 1).
    pub target_ctr: f64,
    /// Standard deviation of the teacher's logit before the bias.
    pub weight_scale: f64,
    /// Amount subtracted from every table's Zipf exponent in the held-out
    /// population (floored at 0).
    #[serde(default)]
    pub test_zipf_shift: f64,
}

impl TeacherSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_ctr > 0.0 && self.target_ctr < 1.0) {
            return Err(Error::config("teacher.target_ctr", "must lie strictly inside (0, 1)"));
        }
        if !(self.weight_scale.is_finite() && self.weight_scale >= 0.0) {
            return Err(Error::config("teacher.weight_scale", "must be finite and non-negative"));
        }
        if !(self.test_zipf_shift.is_finite() && self.test_zipf_shift >= 0.0) {
            return Err(Error::config("teacher.test_zipf_shift", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// One labeled impression.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub dense: Vec<f64>,
    /// Per table, `hots` distinct category indices.
    pub sparse: Vec<Vec<u32>>,
    pub label: bool,
}

/// Which population a stream is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Hidden generative model behind every synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    schema: FeatureSchema,
    dense_weights: Vec<f64>,
    /// Per table, one scalar logit effect per category.
    effects: Vec<Vec<f64>>,
    bias: f64,
    train_popularity: Vec<Zipf>,
    test_popularity: Vec<Zipf>,
}

pub fn build_teacher(schema: &FeatureSchema, spec: &TeacherSpec) -> Result<Teacher> {
    schema.validate()?;
    spec.validate()?;

    let mut rng = seed::rng(seed::derive(spec.seed, purpose::TEACHER_WEIGHTS));
    let dense_sd = spec.weight_scale / math::sqrt(2.0 * schema.num_dense as f64);
    let sparse_sd = spec.weight_scale / math::sqrt(2.0 * schema.total_hots() as f64);
    let dense_weights = (0..schema.num_dense).map(|_| dense_sd * normal(&mut rng)).collect();
    let effects =
        schema.tables.iter().map(|t| (0..t.vocab_size).map(|_| sparse_sd * normal(&mut rng)).collect()).collect();

    let popularity = |shift: f64| -> Vec<Zipf> {
        schema.tables.iter().map(|t| Zipf::new(t.vocab_size, (t.zipf_exponent - shift).max(0.0))).collect()
    };

    let mut teacher = Teacher {
        schema: schema.clone(),
        dense_weights,
        effects,
        bias: 0.0,
        train_popularity: popularity(0.0),
        test_popularity: popularity(spec.test_zipf_shift),
    };
    teacher.bias = teacher.calibrate_bias(spec)?;
    Ok(teacher)
}

impl Teacher {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Logit of the click probability for `(dense, sparse)`.
    pub fn logit(&self, dense: &[f64], sparse: &[Vec<u32>]) -> f64 {
        self.bias + self.logit_without_bias(dense, sparse)
    }

    pub fn click_probability(&self, dense: &[f64], sparse: &[Vec<u32>]) -> f64 {
        math::sigmoid(self.logit(dense, sparse))
    }

    fn logit_without_bias(&self, dense: &[f64], sparse: &[Vec<u32>]) -> f64 {
        let mut z: f64 = dense.iter().zip(&self.dense_weights).map(|(x, w)| x * w).sum();
        for (indices, effects) in sparse.iter().zip(&self.effects) {
            for &i in indices {
                z += effects[i as usize];
            }
        }
        z
    }

    /// Bisection on the bias so that the mean click probability over a
    /// fixed calibration sample matches the target.
    fn calibrate_bias(&self, spec: &TeacherSpec) -> Result<f64> {
        let mut rng = seed::rng(seed::derive(spec.seed, purpose::TEACHER_CALIBRATION));
        let logits: Vec<f64> = (0..CALIBRATION_SAMPLES)
            .map(|_| {
                let (dense, sparse) = self.draw_features(&mut rng, Split::Train);
                self.logit_without_bias(&dense, &sparse)
            })
            .collect();
        let mean_ctr = |b: f64| logits.iter().map(|z| math::sigmoid(z + b)).sum::<f64>() / logits.len() as f64;

        let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
        let mut mid = 0.0;
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let ctr = mean_ctr(mid);
            if ctr == spec.target_ctr || hi - lo < 1e-13 {
                break;
            }
            if ctr < spec.target_ctr {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let achieved = mean_ctr(mid);
        if (achieved - spec.target_ctr).abs() > CALIBRATION_TOLERANCE {
            return Err(Error::config(
                "teacher.target_ctr",
                format!("calibration reached {achieved:.4}, target {}", spec.target_ctr),
            ));
        }
        Ok(mid)
    }

    fn draw_features(&self, rng: &mut ChaCha8Rng, split: Split) -> (Vec<f64>, Vec<Vec<u32>>) {
        let dense = (0..self.schema.num_dense).map(|_| normal(rng)).collect();
        let popularity = match split {
            Split::Train => &self.train_popularity,
            Split::Test => &self.test_popularity,
        };
        let sparse = popularity
            .iter()
            .zip(&self.schema.tables)
            .map(|(zipf, spec)| draw_distinct(zipf, spec.hots as usize, rng))
            .collect();
        (dense, sparse)
    }

    fn draw_sample(&self, rng: &mut ChaCha8Rng, split: Split) -> Sample {
        let (dense, sparse) = self.draw_features(rng, split);
        let p = self.click_probability(&dense, &sparse);
        let u: f64 = rng.random();
        Sample { dense, sparse, label: u < p }
    }

    /// Unbounded sample stream; take a prefix of the length you need.
    pub fn stream(&self, seed: u64, split: Split) -> SampleStream<'_> {
        SampleStream { teacher: self, rng: seed::rng(seed), split }
    }
}

/// Infinite, deterministic iterator over samples of one population.
pub struct SampleStream<'a> {
    teacher: &'a Teacher,
    rng: ChaCha8Rng,
    split: Split,
}

impl Iterator for SampleStream<'_> {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        Some(self.teacher.draw_sample(&mut self.rng, self.split))
    }
}

/// First `n` training-population samples of the stream seeded by `seed`.
pub fn sample_stream(schema: &FeatureSchema, teacher: &Teacher, seed: u64, n: usize) -> Result<Vec<Sample>> {
    schema.validate()?;
    if schema != teacher.schema() {
        return Err(Error::Input("schema does not match the teacher's schema".into()));
    }
    Ok(teacher.stream(seed, Split::Train).take(n).collect())
}

/// Mean label of a non-empty sample sequence.
pub fn background_ctr(samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("background CTR of an empty sequence".into()));
    }
    let clicks = samples.iter().filter(|s| s.label).count();
    Ok(clicks as f64 / samples.len() as f64)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Maximum redraws per slot before falling back to the most popular unused
/// category.
const MAX_REDRAWS: usize = 64;

fn draw_distinct(zipf: &Zipf, hots: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut out = Vec::with_capacity(hots);
    while out.len() < hots {
        let mut pick = None;
        for _ in 0..MAX_REDRAWS {
            let k = zipf.sample(rng);
            if !out.contains(&k) {
                pick = Some(k);
                break;
            }
        }
        let k = pick.unwrap_or_else(|| (0..zipf.len() as u32).find(|k| !out.contains(k)).expect("hots <= vocab_size"));
        out.push(k);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn small_schema() -> FeatureSchema {
        FeatureSchema {
            num_dense: 4,
            tables: vec![
                SparseTableSpec { vocab_size: 50, hots: 1, zipf_exponent: 1.1 },
                SparseTableSpec { vocab_size: 20, hots: 3, zipf_exponent: 0.8 },
            ],
        }
    }

    fn spec(target_ctr: f64) -> TeacherSpec {
        TeacherSpec { seed: 11, target_ctr, weight_scale: 1.5, test_zipf_shift: 0.2 }
    }

    #[test]
    fn teacher_is_deterministic() {
        let a = build_teacher(&small_schema(), &spec(0.3)).unwrap();
        let b = build_teacher(&small_schema(), &spec(0.3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    }

    #[test]
    fn invalid_target_ctr_rejected() {
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            let err = build_teacher(&small_schema(), &spec(bad)).unwrap_err();
            assert!(matches!(err, Error::Config { ref field, .. } if field == "teacher.target_ctr"));
        }
    }

    #[test]
    fn zero_weights_force_zero_logit_at_half() {
        let s = TeacherSpec { seed: 3, target_ctr: 0.5, weight_scale: 0.0, test_zipf_shift: 0.0 };
        let t = build_teacher(&small_schema(), &s).unwrap();
        assert_eq!(t.bias(), 0.0);
        for sample in t.stream(5, Split::Train).take(100) {
            assert_eq!(t.click_probability(&sample.dense, &sample.sparse), 0.5);
        }
    }

    #[test]
    fn empty_and_prefix_streams() {
        let schema = small_schema();
        let t = build_teacher(&schema, &spec(0.2)).unwrap();
        assert!(sample_stream(&schema, &t, 1, 0).unwrap().is_empty());
        let long = sample_stream(&schema, &t, 1, 300).unwrap();
        for k in [1, 17, 256, 300] {
            assert_eq!(sample_stream(&schema, &t, 1, k).unwrap(), long[..k]);
        }
    }

    #[test]
    fn seeds_determine_streams() {
        let schema = small_schema();
        let t = build_teacher(&schema, &spec(0.2)).unwrap();
        let a = sample_stream(&schema, &t, 77, 1000).unwrap();
        let b = sample_stream(&schema, &t, 77, 1000).unwrap();
        let c = sample_stream(&schema, &t, 78, 1000).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn indices_in_range_and_distinct() {
        let schema = small_schema();
        let t = build_teacher(&schema, &spec(0.2)).unwrap();
        for split in [Split::Train, Split::Test] {
            for s in t.stream(3, split).take(2000) {
                assert_eq!(s.dense.len(), schema.num_dense);
                for (indices, table) in s.sparse.iter().zip(&schema.tables) {
                    assert_eq!(indices.len(), table.hots as usize);
                    assert!(indices.iter().all(|&i| i < table.vocab_size));
                    let mut sorted = indices.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    assert_eq!(sorted.len(), indices.len());
                }
            }
        }
    }

    #[test]
    fn hots_equal_to_vocab_uses_every_category() {
        let schema = FeatureSchema {
            num_dense: 1,
            tables: vec![SparseTableSpec { vocab_size: 3, hots: 3, zipf_exponent: 6.0 }],
        };
        let t = build_teacher(&schema, &spec(0.4)).unwrap();
        for s in t.stream(1, Split::Train).take(50) {
            let mut idx = s.sparse[0].clone();
            idx.sort_unstable();
            assert_eq!(idx, vec![0, 1, 2]);
        }
    }

    #[test]
    fn schema_mismatch_rejected() {
        let schema = small_schema();
        let t = build_teacher(&schema, &spec(0.2)).unwrap();
        let mut other = schema.clone();
        other.num_dense = 5;
        assert!(matches!(sample_stream(&other, &t, 1, 1), Err(Error::Input(_))));
    }

    #[test]
    fn schema_validation() {
        let mut s = small_schema();
        s.tables[1].hots = 21;
        assert!(matches!(s.validate(), Err(Error::Config { .. })));
        let mut s = small_schema();
        s.num_dense = 0;
        assert!(s.validate().is_err());
        let mut s = small_schema();
        s.tables.clear();
        assert!(s.validate().is_err());
        let mut s = small_schema();
        s.tables[0].vocab_size = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn background_ctr_examples() {
        let mk = |label| Sample { dense: vec![0.0], sparse: vec![vec![0]], label };
        let a: Vec<_> = [true, false, true, false].into_iter().map(mk).collect();
        assert_eq!(background_ctr(&a).unwrap(), 0.5);
        let b: Vec<_> = [true; 4].into_iter().map(mk).collect();
        assert_eq!(background_ctr(&b).unwrap(), 1.0);
        assert!(matches!(background_ctr(&[]), Err(Error::Domain(_))));
    }
}
