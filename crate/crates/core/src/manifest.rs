//! Run provenance: configuration hashes and the manifest written next to outputs.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

/// SHA-256 of the canonical JSON form of `value`, as 16 hex digits.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration types serialize to JSON");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub command: Vec<String>,
    pub serial: bool,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(command: Vec<String>, config_hash: String, seed: u64, serial: bool) -> Self {
        Self {
            config_hash,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            serial,
            started_unix: unix_now(),
            finished_unix: None,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, file_name: impl Into<String>) {
        self.outputs.push(file_name.into());
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished_unix = Some(unix_now());
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&("fbm", 0.75, 42u64));
        assert_eq!(a, config_hash(&("fbm", 0.75, 42u64)));
        assert_ne!(a, config_hash(&("fbm", 0.75, 43u64)));
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::start(vec!["simulate".into()], "abc".into(), 7, true);
        m.record("X.csv");
        let m = m.finish(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
