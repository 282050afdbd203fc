//! Run manifests: enough to regenerate a report and to detect changed inputs.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Report fields that record elapsed time and are excluded from digests.
const VOLATILE_KEYS: &[&str] = &["wall_clock_seconds", "seconds"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved job with the config file merged under the flags.
    pub config: Value,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub build: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Digest of the report with timing fields zeroed.
    pub report_digest: String,
}

impl RunManifest {
    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> CliResult<Vec<PathBuf>> {
        let mut out = vec![];
        for f in &self.inputs {
            if sha256_file(&f.path)? != f.sha256 {
                out.push(f.path.clone());
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Digest of a JSON value with object keys in serde_json's (sorted) order.
pub fn value_digest(v: &Value) -> String {
    sha256_bytes(&serde_json::to_vec(v).expect("JSON values serialize"))
}

/// Copy of `report` with every timing field set to zero.
pub fn canonical(report: &Value) -> Value {
    match report {
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| {
                    let v = if VOLATILE_KEYS.contains(&k.as_str()) { Value::from(0.0) } else { canonical(v) };
                    (k.clone(), v)
                })
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

pub fn report_digest(report: &Value) -> String {
    value_digest(&canonical(report))
}
