//! The shipped stores under `fixtures/` must match what the code produces.
//! Set `RECSCALE_BLESS=1` to rewrite them.

mod common;

use std::path::Path;

use common::*;
use recscale_lab::store::StoreWriter;

fn check_or_bless(shipped: &Path, fresh: &Path) {
    let fresh = std::fs::read(fresh).unwrap();
    if std::env::var_os("RECSCALE_BLESS").is_some() {
        std::fs::write(shipped, &fresh).unwrap();
        return;
    }
    let shipped_bytes = std::fs::read(shipped).unwrap_or_default();
    assert!(shipped_bytes == fresh, "{} is stale; rerun with RECSCALE_BLESS=1", shipped.display());
}

#[test]
fn fit_recovery_fixture_is_current() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fit.jsonl");
    let mut w = StoreWriter::open(&path).unwrap();
    for r in fit_recovery_records() {
        w.append(&r).unwrap();
    }
    check_or_bless(&repo_file("fixtures/fit_recovery.jsonl"), &path);
}

#[test]
fn demo_fixture_matches_a_fresh_demo_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("demo.jsonl");
    let config = repo_file("demo.config");
    let out = run(dir.path(), &["sweep", "--config", config.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    check_or_bless(&repo_file("fixtures/demo_runs.jsonl"), &store);
}
