//! Run specifications, run records and grid construction.
//!
//! A [`RunSpec`] names one training run: a scaling scheme and factor applied
//! to a base config (optionally after a vertical pre-scaling `vsf`), a data
//! size and a master seed. Its `run_id` is a SHA-256 digest of those fields,
//! so records from any sweep can be matched back to specs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dlrm::{apply_scaling, count_flops, count_params, DlrmConfig, Interaction, OptimizerConfig, Scheme};
use crate::synthgen::Teacher;
use crate::trainer::{train_one_epoch, DataSpec, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub scheme: Scheme,
    /// Multiplier, or the target embedding dim for horizontal scaling.
    pub factor: f64,
    /// Vertical scaling applied before `scheme`; 1 for plain grids.
    pub vsf: f64,
    pub data_size: u64,
    /// Fingerprint of the base config, see [`config_fingerprint`].
    pub base_config: String,
    pub master_seed: u64,
}

impl RunSpec {
    pub fn new(base: &DlrmConfig, scheme: Scheme, factor: f64, vsf: f64, data_size: u64, master_seed: u64) -> Self {
        let base_config = config_fingerprint(base);
        let run_id = run_id(scheme, factor, vsf, data_size, &base_config, master_seed);
        RunSpec { run_id, scheme, factor, vsf, data_size, base_config, master_seed }
    }

    /// The architecture this run trains.
    pub fn config(&self, base: &DlrmConfig) -> Result<DlrmConfig> {
        if config_fingerprint(base) != self.base_config {
            return Err(Error::Input(format!("run {} was built from a different base config", self.run_id)));
        }
        let pre = if self.vsf == 1.0 { base.clone() } else { apply_scaling(base, Scheme::Vertical, self.vsf)? };
        apply_scaling(&pre, self.scheme, self.factor)
    }
}

fn run_id(scheme: Scheme, factor: f64, vsf: f64, data_size: u64, base: &str, seed: u64) -> String {
    let canonical = format!(
        "scheme={scheme};factor={:016x};vsf={:016x};D={data_size};base={base};seed={seed}",
        factor.to_bits(),
        vsf.to_bits()
    );
    hex_prefix(&Sha256::digest(canonical.as_bytes()), 16)
}

fn hex_prefix(bytes: &[u8], n: usize) -> String {
    let mut s = String::with_capacity(2 * n);
    for b in &bytes[..n] {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Stable 16-hex-digit digest of an architecture (scheme tag excluded).
pub fn config_fingerprint(cfg: &DlrmConfig) -> String {
    let mut canonical = format!("dense={};tables=", cfg.num_dense);
    for t in &cfg.tables {
        let _ = write!(canonical, "{}x{},", t.rows, t.dim);
    }
    let _ = write!(canonical, ";bottom={:?};overarch={:?};interaction=", cfg.bottom_widths, cfg.overarch_widths);
    canonical.push_str(match cfg.interaction {
        Interaction::Concat => "concat",
        Interaction::ConcatDot => "concat-dot",
    });
    hex_prefix(&Sha256::digest(canonical.as_bytes()), 8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// One finished (or failed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub scheme: Scheme,
    pub factor: f64,
    pub vsf: f64,
    pub data_size: u64,
    pub base_config: String,
    pub master_seed: u64,
    #[serde(rename = "P_total")]
    pub p_total: u64,
    #[serde(rename = "P_embedding")]
    pub p_embedding: u64,
    #[serde(rename = "P_nonembedding")]
    pub p_nonembedding: u64,
    pub train_flops_per_example: u64,
    /// Total training flops, `train_flops_per_example × data_size`.
    #[serde(rename = "C")]
    pub compute: u64,
    pub ne_train: Option<f64>,
    pub ne_test: Option<f64>,
    pub wall_seconds: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn spec(&self) -> RunSpec {
        RunSpec {
            run_id: self.run_id.clone(),
            scheme: self.scheme,
            factor: self.factor,
            vsf: self.vsf,
            data_size: self.data_size,
            base_config: self.base_config.clone(),
            master_seed: self.master_seed,
        }
    }

    /// Checks the accounting identities and the status contract.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Input(format!("record {}: {what}", self.run_id)));
        if self.p_total != self.p_embedding + self.p_nonembedding {
            return bad("P_total != P_embedding + P_nonembedding");
        }
        if Some(self.compute) != self.train_flops_per_example.checked_mul(self.data_size) {
            return bad("C != train_flops_per_example × data_size");
        }
        let spec = self.spec();
        if run_id(spec.scheme, spec.factor, spec.vsf, spec.data_size, &spec.base_config, spec.master_seed)
            != self.run_id
        {
            return bad("run_id does not match the spec fields");
        }
        if self.is_ok() {
            for ne in [self.ne_train, self.ne_test] {
                match ne {
                    Some(v) if v.is_finite() && v > 0.0 => {}
                    _ => return bad("status ok requires finite positive ne_train and ne_test"),
                }
            }
        }
        Ok(())
    }

    /// Resource value on `axis`. Parameters exclude embeddings for overarch
    /// and MLP scaling.
    pub fn x(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Data => self.data_size as f64,
            Axis::Params if self.scheme.counts_embedding_params() => self.p_total as f64,
            Axis::Params => self.p_nonembedding as f64,
            Axis::Compute => self.compute as f64,
        }
    }

    pub fn y(&self, field: LossField) -> Option<f64> {
        match field {
            LossField::NeTest => self.ne_test,
            LossField::NeTrain => self.ne_train,
        }
    }
}

/// Resource axis of a scaling curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "D")]
    Data,
    #[serde(rename = "P")]
    Params,
    #[serde(rename = "C")]
    Compute,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Data, Axis::Params, Axis::Compute];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Data => "D",
            Axis::Params => "P",
            Axis::Compute => "C",
        }
    }

    pub fn parse(s: &str) -> Result<Axis> {
        match s {
            "D" | "data" => Ok(Axis::Data),
            "P" | "params" | "parameter" => Ok(Axis::Params),
            "C" | "compute" => Ok(Axis::Compute),
            _ => Err(Error::config("axis", format!("unknown axis `{s}` (expected D, P or C)"))),
        }
    }
}

/// Which loss a curve tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossField {
    NeTest,
    NeTrain,
}

impl LossField {
    pub fn as_str(self) -> &'static str {
        match self {
            LossField::NeTest => "ne_test",
            LossField::NeTrain => "ne_train",
        }
    }

    pub fn parse(s: &str) -> Result<LossField> {
        match s {
            "ne_test" => Ok(LossField::NeTest),
            "ne_train" => Ok(LossField::NeTrain),
            _ => Err(Error::config("y", format!("unknown loss field `{s}` (expected ne_test or ne_train)"))),
        }
    }
}

/// Specs of a grid plus the duplicate list entries that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub specs: Vec<RunSpec>,
    pub duplicate_factors: Vec<f64>,
    pub duplicate_data_sizes: Vec<u64>,
    pub duplicate_seeds: Vec<u64>,
}

fn dedup<T: Copy + PartialEq>(items: &[T]) -> (Vec<T>, Vec<T>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &x in items {
        if kept.contains(&x) {
            dropped.push(x);
        } else {
            kept.push(x);
        }
    }
    (kept, dropped)
}

/// Cartesian product `factors × data_sizes × seeds` in that nesting order.
pub fn build_grid(
    base: &DlrmConfig,
    scheme: Scheme,
    factors: &[f64],
    data_sizes: &[u64],
    seeds: &[u64],
) -> Result<Grid> {
    build_cross_grid(base, &[1.0], scheme, factors, data_sizes, seeds)
}

/// Like [`build_grid`], with an outer loop over vertical pre-scaling factors.
/// Used for the horizontal × vertical embedding sensitivity grid.
pub fn build_cross_grid(
    base: &DlrmConfig,
    vsfs: &[f64],
    scheme: Scheme,
    factors: &[f64],
    data_sizes: &[u64],
    seeds: &[u64],
) -> Result<Grid> {
    base.validate()?;
    for (name, empty) in [
        ("vsf", vsfs.is_empty()),
        ("factors", factors.is_empty()),
        ("data_sizes", data_sizes.is_empty()),
        ("seeds", seeds.is_empty()),
    ] {
        if empty {
            return Err(Error::config(name, "list must not be empty"));
        }
    }
    let (vsfs, _) = dedup(vsfs);
    let (factors, duplicate_factors) = dedup(factors);
    let (data_sizes, duplicate_data_sizes) = dedup(data_sizes);
    let (seeds, duplicate_seeds) = dedup(seeds);

    let mut specs = Vec::with_capacity(vsfs.len() * factors.len() * data_sizes.len() * seeds.len());
    for &vsf in &vsfs {
        for &factor in &factors {
            let probe = RunSpec::new(base, scheme, factor, vsf, 0, 0);
            probe.config(base).map_err(|e| {
                Error::config("factor", format!("{factor} is invalid for scheme {scheme} (vsf {vsf}): {e}"))
            })?;
            for &d in &data_sizes {
                for &seed in &seeds {
                    specs.push(RunSpec::new(base, scheme, factor, vsf, d, seed));
                }
            }
        }
    }
    check_unique_ids(&specs)?;
    Ok(Grid { specs, duplicate_factors, duplicate_data_sizes, duplicate_seeds })
}

/// Fails when two different specs share a run id.
pub fn check_unique_ids(specs: &[RunSpec]) -> Result<()> {
    let mut seen: BTreeMap<&str, &RunSpec> = BTreeMap::new();
    for spec in specs {
        if let Some(prev) = seen.insert(&spec.run_id, spec) {
            if prev != spec {
                return Err(Error::RunIdCollision(spec.run_id.clone()));
            }
        }
    }
    Ok(())
}

/// Trains one spec to completion. `wall_seconds` is left at 0 for the caller
/// to fill in. Training failures become `status = failed` records.
pub fn execute_spec(
    spec: &RunSpec,
    base: &DlrmConfig,
    teacher: &Teacher,
    opt: &OptimizerConfig,
    train: &TrainConfig,
) -> Result<RunRecord> {
    let config = spec.config(base)?;
    let params = count_params(&config)?;
    let flops = count_flops(&config)?;
    let data = DataSpec { master_seed: spec.master_seed, data_size: spec.data_size };
    let (ne_train, ne_test, status, error) = match train_one_epoch(&config, teacher, data, opt, train) {
        Ok(out) => (Some(out.train_ne), Some(out.test_ne), Status::Ok, None),
        Err(fail) => {
            (None, None, Status::Failed, Some(format!("after {} examples: {}", fail.examples_seen, fail.error)))
        }
    };
    let compute = flops
        .train_per_example
        .checked_mul(spec.data_size)
        .ok_or_else(|| Error::Input(format!("run {}: compute overflows u64", spec.run_id)))?;
    Ok(RunRecord {
        run_id: spec.run_id.clone(),
        scheme: spec.scheme,
        factor: spec.factor,
        vsf: spec.vsf,
        data_size: spec.data_size,
        base_config: spec.base_config.clone(),
        master_seed: spec.master_seed,
        p_total: params.total,
        p_embedding: params.embedding,
        p_nonembedding: params.nonembedding,
        train_flops_per_example: flops.train_per_example,
        compute,
        ne_train,
        ne_test,
        wall_seconds: 0.0,
        status,
        error,
    })
}
