//! JSON Lines record store: one [`RunRecord`] per line, append-only.
//!
//! Every record is written with a single `write_all` of the line and its
//! newline, so a crash can leave at most one unterminated line at the end.
//! Readers drop such a line; [`StoreWriter::open`] truncates it away.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use recscale_core::dlrm::Scheme;
use recscale_core::runs::{RunRecord, Status};

use crate::error::{LabError, Result};

/// Which records [`load_records`] keeps. `None` matches everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    pub scheme: Option<Scheme>,
    pub seed: Option<u64>,
    pub status: Option<Status>,
}

impl Filter {
    pub fn matches(&self, r: &RunRecord) -> bool {
        self.scheme.is_none_or(|s| s == r.scheme)
            && self.seed.is_none_or(|s| s == r.master_seed)
            && self.status.is_none_or(|s| s == r.status)
    }
}

struct Parsed {
    records: Vec<RunRecord>,
    /// Byte length of the complete lines.
    valid_len: u64,
}

fn parse(path: &Path, text: &str) -> Result<Parsed> {
    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    let mut valid_len = 0u64;
    for (i, chunk) in text.split_inclusive('\n').enumerate() {
        let Some(line) = chunk.strip_suffix('\n') else {
            log::warn!("{}: discarding unterminated last line {}", path.display(), i + 1);
            break;
        };
        valid_len += chunk.len() as u64;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| LabError::Store { path: path.to_owned(), line: i + 1, message };
        let record: RunRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        record.validate().map_err(|e| err(e.to_string()))?;
        if !ids.insert(record.run_id.clone()) {
            return Err(err(format!("duplicate run_id {}", record.run_id)));
        }
        records.push(record);
    }
    Ok(Parsed { records, valid_len })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

/// All records matching `filter`, in store order.
pub fn load_records(path: &Path, filter: &Filter) -> Result<Vec<RunRecord>> {
    let parsed = parse(path, &read(path)?)?;
    Ok(parsed.records.into_iter().filter(|r| filter.matches(r)).collect())
}

/// Single appender to a store file.
pub struct StoreWriter {
    path: PathBuf,
    file: File,
    existing: Vec<RunRecord>,
}

impl StoreWriter {
    /// Opens (creating if needed) a store, dropping any unterminated tail.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        }
        let io_err = |e: io::Error| LabError::io(path, e);
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(e)),
        };
        let parsed = parse(path, &text)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        if parsed.valid_len < text.len() as u64 {
            file.set_len(parsed.valid_len).map_err(io_err)?;
        }
        Ok(StoreWriter { path: path.to_owned(), file, existing: parsed.records })
    }

    /// Records present when the store was opened.
    pub fn existing(&self) -> &[RunRecord] {
        &self.existing
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).map_err(|e| LabError::io(&self.path, e.into()))?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| LabError::io(&self.path, e))?;
        self.file.flush().map_err(|e| LabError::io(&self.path, e))
    }
}
