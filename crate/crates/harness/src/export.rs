//! CSV tables and the run manifest.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::spec::ExperimentSpec;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const POLICIES_CSV: &str = "policies.csv";
pub const POLICY_SUMMARY_CSV: &str = "policy_summary.csv";
pub const RUNTIME_CSV: &str = "runtime.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Column names of a row type, in field order.
pub fn columns<T: Serialize + Default>() -> Vec<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(T::default()).expect("default row serializes");
    let bytes = w.into_inner().expect("in-memory writer");
    let text = String::from_utf8(bytes).expect("csv is utf-8");
    text.lines().next().unwrap_or_default().split(',').map(str::to_owned).collect()
}

/// Writes `rows` with a header line; an empty table is header-only.
pub fn write_table<T: Serialize + Default>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| HarnessError::Csv { path: path.to_owned(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(columns::<T>()).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| HarnessError::Csv { path: path.to_owned(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err)
}

/// SHA-256 over `blob <len>\0<bytes>`, as git hashes objects.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub spec: ExperimentSpec,
    /// [`git_blob_hash`] of the experiment's canonical JSON.
    pub spec_hash: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, spec: &ExperimentSpec, outputs: &[&str]) -> Self {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            spec: spec.clone(),
            spec_hash: git_blob_hash(spec.canonical_json().as_bytes()),
            outputs: outputs.iter().map(|s| (*s).to_owned()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_JSON);
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}
