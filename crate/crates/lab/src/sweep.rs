//! Executes run specs against a record store.
//!
//! Workers pull specs from a shared queue; a single writer appends finished
//! records in spec order, holding early finishers back until their
//! predecessors are written. The store is therefore identical for any
//! parallelism, and an interrupted sweep leaves a prefix of the pending
//! specs on disk.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use recscale_core::dlrm::{DlrmConfig, OptimizerConfig};
use recscale_core::runs::{check_unique_ids, execute_spec, RunRecord, RunSpec};
use recscale_core::synthgen::Teacher;
use recscale_core::trainer::TrainConfig;

use crate::error::{LabError, Result};
use crate::store::StoreWriter;

/// Everything a run needs besides its spec.
pub struct SweepContext<'a> {
    pub base: &'a DlrmConfig,
    pub teacher: &'a Teacher,
    pub optimizer: &'a OptimizerConfig,
    pub train: &'a TrainConfig,
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// One record per requested spec, in spec order.
    pub records: Vec<RunRecord>,
    pub executed: usize,
    pub skipped: usize,
}

impl SweepOutcome {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Runs every spec not yet in the store and appends its record.
pub fn execute(specs: &[RunSpec], ctx: &SweepContext<'_>, parallelism: usize, store: &Path) -> Result<SweepOutcome> {
    check_unique_ids(specs)?;
    let mut writer = StoreWriter::open(store)?;
    let done: BTreeMap<String, RunRecord> = writer.existing().iter().map(|r| (r.run_id.clone(), r.clone())).collect();

    let mut seen = BTreeSet::new();
    let pending: Vec<&RunSpec> =
        specs.iter().filter(|s| !done.contains_key(&s.run_id) && seen.insert(s.run_id.clone())).collect();
    let skipped = specs.len() - pending.len();
    if skipped > 0 {
        log::info!("{skipped} of {} runs already in {}", specs.len(), store.display());
    }

    let fresh = run_pending(&pending, ctx, parallelism.max(1), &mut writer)?;
    let executed = fresh.len();
    let mut by_id: BTreeMap<String, RunRecord> = done;
    by_id.extend(fresh.into_iter().map(|r| (r.run_id.clone(), r)));
    let records = specs
        .iter()
        .map(|s| by_id.get(&s.run_id).cloned().ok_or_else(|| LabError::Usage(format!("run {} missing", s.run_id))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutcome { records, executed, skipped })
}

fn run_one(spec: &RunSpec, ctx: &SweepContext<'_>) -> recscale_core::Result<RunRecord> {
    let start = Instant::now();
    let mut record = execute_spec(spec, ctx.base, ctx.teacher, ctx.optimizer, ctx.train)?;
    if ctx.record_wall_time {
        record.wall_seconds = start.elapsed().as_secs_f64();
    }
    Ok(record)
}

fn run_pending(
    pending: &[&RunSpec],
    ctx: &SweepContext<'_>,
    parallelism: usize,
    writer: &mut StoreWriter,
) -> Result<Vec<RunRecord>> {
    let total = pending.len();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, recscale_core::Result<RunRecord>)>();
    let started = Instant::now();

    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(total) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= total {
                    break;
                }
                let result = run_one(pending[i], ctx);
                let stop = result.is_err();
                if tx.send((i, result)).is_err() || stop {
                    break;
                }
            });
        }
        drop(tx);

        let mut held: BTreeMap<usize, RunRecord> = BTreeMap::new();
        let mut written = Vec::with_capacity(total);
        let mut failure = None;
        for (i, result) in rx {
            match result {
                Ok(record) => {
                    held.insert(i, record);
                }
                Err(e) => {
                    // Configuration-level errors stop the queue; records
                    // already finished are still written below.
                    next.store(total, Ordering::Relaxed);
                    failure.get_or_insert(e);
                }
            }
            while let Some(record) = held.remove(&written.len()) {
                writer.append(&record)?;
                log_progress(&record, written.len() + 1, total, started);
                written.push(record);
            }
        }
        match failure {
            Some(e) => Err(e.into()),
            None => Ok(written),
        }
    })
}

fn log_progress(record: &RunRecord, done: usize, total: usize, started: Instant) {
    let elapsed = started.elapsed().as_secs_f64();
    let eta = elapsed / done as f64 * (total - done) as f64;
    let outcome = match (record.is_ok(), record.ne_test) {
        (true, Some(ne)) => format!("ne_test={ne:.5}"),
        _ => format!("FAILED: {}", record.error.as_deref().unwrap_or("unknown error")),
    };
    log::info!(
        "[{done}/{total}] {} factor={} vsf={} D={} seed={} {outcome} (eta {eta:.0}s)",
        record.scheme,
        record.factor,
        record.vsf,
        record.data_size,
        record.master_seed
    );
}
