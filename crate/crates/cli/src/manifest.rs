//! Run manifest: configuration snapshot, timings and a digest per emitted file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub label: String,
    pub seconds: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub resolved: serde_json::Value,
    pub timings: Vec<RunTiming>,
    pub files: Vec<FileEntry>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_entry(dir: &Path, rel: &str) -> Result<FileEntry, CliError> {
    let path = dir.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(FileEntry { path: rel.to_string(), bytes: bytes.len() as u64, sha256: digest(&bytes) })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Manifest {
            file: MANIFEST_NAME.into(),
            reason: e.to_string(),
        })?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Manifest {
            file: path.display().to_string(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest {
            file: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Checks size and digest of every listed file.
    pub fn verify(&self, dir: &Path) -> Result<(), CliError> {
        for f in &self.files {
            let path = dir.join(&f.path);
            let bytes = std::fs::read(&path).map_err(|e| CliError::Manifest {
                file: f.path.clone(),
                reason: e.to_string(),
            })?;
            if bytes.len() as u64 != f.bytes || digest(&bytes) != f.sha256 {
                return Err(CliError::Manifest { file: f.path.clone(), reason: "digest mismatch".into() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "hello").unwrap();
        let m = RunManifest {
            software: "wearsar".into(),
            version: "0".into(),
            command: "run".into(),
            config: BTreeMap::new(),
            resolved: serde_json::Value::Null,
            timings: vec![],
            files: vec![file_entry(dir.path(), "a.txt").unwrap()],
        };
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        back.verify(dir.path()).unwrap();
        std::fs::write(dir.path().join("a.txt"), "hellO").unwrap();
        let e = back.verify(dir.path()).unwrap_err();
        assert!(e.line().contains("file=a.txt"));
        assert_eq!(e.exit_code(), 4);
    }
}
