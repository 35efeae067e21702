#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use recscale_core::dlrm::{count_flops, count_params, Scheme};
use recscale_core::runs::{RunRecord, RunSpec, Status};
use recscale_lab::config::ExperimentConfig;

/// Law behind the fit-recovery fixture's test NE: (alpha, beta, gamma).
pub const RECOVERY_TEST_LAW: (f64, f64, f64) = (5.0, 0.4, 0.55);
pub const RECOVERY_TRAIN_LAW: (f64, f64, f64) = (6.0, 0.45, 0.5);

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn repo_file(name: &str) -> PathBuf {
    repo_root().join(name)
}

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_recscale"));
    cmd.env_remove("RECSCALE_STORE").env_remove("RECSCALE_PARALLELISM").env("RUST_LOG", "warn");
    cmd
}

/// Runs the binary in `cwd` and returns its output.
pub fn run(cwd: &Path, args: &[&str]) -> Output {
    bin().current_dir(cwd).args(args).output().expect("spawn recscale")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn demo_config() -> ExperimentConfig {
    ExperimentConfig::load(&repo_file("demo.config")).unwrap().config
}

/// Records of the base model whose losses follow known laws exactly.
pub fn fit_recovery_records() -> Vec<RunRecord> {
    let base = demo_config().base_model();
    let params = count_params(&base).unwrap();
    let flops = count_flops(&base).unwrap();
    let law = |(a, b, g): (f64, f64, f64), d: f64| a * d.powf(-b) + g;
    (0..10)
        .map(|k| {
            let d = 1000u64 << k;
            let spec = RunSpec::new(&base, Scheme::None, 1.0, 1.0, d, 0);
            RunRecord {
                run_id: spec.run_id,
                scheme: spec.scheme,
                factor: spec.factor,
                vsf: spec.vsf,
                data_size: d,
                base_config: spec.base_config,
                master_seed: 0,
                p_total: params.total,
                p_embedding: params.embedding,
                p_nonembedding: params.nonembedding,
                train_flops_per_example: flops.train_per_example,
                compute: flops.train_per_example * d,
                ne_train: Some(law(RECOVERY_TRAIN_LAW, d as f64)),
                ne_test: Some(law(RECOVERY_TEST_LAW, d as f64)),
                wall_seconds: 0.0,
                status: Status::Ok,
                error: None,
            }
        })
        .collect()
}

/// Store lines sorted, for order-insensitive comparison.
pub fn sorted_lines(path: &Path) -> Vec<String> {
    let mut lines: Vec<String> = std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect();
    lines.sort();
    lines
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_owned(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
