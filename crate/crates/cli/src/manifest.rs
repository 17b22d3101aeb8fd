//! Provenance files written next to every artifact.

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stancebench_core::corpus::{Instance, InstanceRecord};

use crate::WorkbenchError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the instance records in id order.
pub fn corpus_hash(instances: &[Instance]) -> String {
    let mut records: Vec<InstanceRecord> = instances.iter().map(InstanceRecord::from).collect();
    records.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let mut h = Sha256::new();
    for r in &records {
        h.update(serde_json::to_vec(r).expect("record serialises"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub corpus_hash: Option<String>,
    pub outputs: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunManifest {
    pub fn begin(command: &str) -> Self {
        let now = Utc::now();
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            config_hash: None,
            corpus_hash: None,
            outputs: Vec::new(),
            started_at: now,
            finished_at: now,
        }
    }

    pub fn finish(mut self, path: &Path) -> Result<(), WorkbenchError> {
        self.finished_at = Utc::now();
        write_json(path, &self)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WorkbenchError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(WorkbenchError::io(path))
}

/// `<path>.manifest.json`, next to a file artifact.
pub fn manifest_path_for(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}
