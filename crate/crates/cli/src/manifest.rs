//! Run manifests: what produced an output directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use orsearch::{Dataset, DatasetPaths};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Every parameter that can change the outputs; paths and thread counts
    /// are left out so that reruns elsewhere hash the same.
    pub config: Value,
    pub config_hash: String,
    pub dataset_hash: String,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
    pub wall_time_ms: u64,
}

impl Manifest {
    pub fn new(command: &str, config: Value, dataset_hash: String, seeds: Vec<u64>) -> Self {
        let config_hash = sha256_hex(config.to_string().as_bytes());
        Self {
            command: command.to_owned(),
            config,
            config_hash,
            dataset_hash,
            seeds,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            details: Value::Null,
            wall_time_ms: 0,
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::format(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over the four dataset files, each prefixed by its length.
pub fn dataset_hash(paths: &DatasetPaths) -> CliResult<String> {
    let mut h = Sha256::new();
    for p in paths.all() {
        let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Hash of the sorted probe ids a run used.
pub fn probes_hash(ds: &Dataset) -> String {
    let mut ids = ds.probes().to_vec();
    ids.sort();
    sha256_hex(ids.join("\n").as_bytes())
}
