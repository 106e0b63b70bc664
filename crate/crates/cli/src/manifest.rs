//! Run directory management: atomic file writes (write-temp-rename in the
//! same directory), SHA-256 content hashes, and the JSON run manifest that
//! records everything needed to reproduce a run.

use crate::config::ResolvedConfig;
use crate::errors::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// What a finished run leaves behind next to its outputs. `config` is the
/// fully resolved key/value map (defaults materialized), so rerunning the
/// subcommand with exactly this config reproduces the CSVs byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: u64,
    pub config: ResolvedConfig,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub outputs: Vec<OutputRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resumed_from: Option<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Other(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Other(format!("cannot parse manifest {}: {e}", path.display())))
    }

    /// Checks every recorded output against its stored hash; returns the
    /// mismatches (empty = everything verifies).
    pub fn verify_outputs(&self, dir: &Path) -> Result<Vec<String>, CliError> {
        let mut bad = Vec::new();
        for out in &self.outputs {
            let p = dir.join(&out.file);
            match std::fs::read(&p) {
                Ok(bytes) => {
                    if sha256_hex(&bytes) != out.sha256 || bytes.len() as u64 != out.bytes {
                        bad.push(out.file.clone());
                    }
                }
                Err(_) => bad.push(out.file.clone()),
            }
        }
        Ok(bad)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Writes `bytes` to a dot-prefixed temp file in the target's directory and
/// renames it into place, so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Other(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Other(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Other(format!("cannot move {} into place: {e}", tmp.display())))
}

/// Accumulates a run's output inventory and finishes with the manifest.
pub struct RunDir {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
    started_unix_ms: u64,
}

impl RunDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunDir { dir, outputs: Vec::new(), started_unix_ms: now_unix_ms() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Writes the manifest (atomically, last) and returns it.
    pub fn finish(
        self,
        subcommand: &str,
        seed: u64,
        config: ResolvedConfig,
        resumed_from: Option<String>,
    ) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            seed,
            config,
            started_unix_ms: self.started_unix_ms,
            finished_unix_ms: now_unix_ms(),
            outputs: self.outputs,
            resumed_from,
        };
        let json = serde_json::to_vec_pretty(&manifest)?;
        write_atomic(&self.dir.join(MANIFEST_NAME), &json)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_records_hashes_that_verify() {
        let tmp = tempfile::tempdir().unwrap();
        let mut rd = RunDir::create(tmp.path().join("run")).unwrap();
        rd.write("a.csv", b"x,y\n1,2\n").unwrap();
        rd.write("b.csv", b"u\n3\n").unwrap();
        let cfg = ResolvedConfig::new();
        let m = rd.finish("demo", 9, cfg, None).unwrap();
        assert_eq!(m.outputs.len(), 2);

        let read = RunManifest::read(&tmp.path().join("run").join(MANIFEST_NAME)).unwrap();
        assert_eq!(read.seed, 9);
        assert!(read.verify_outputs(&tmp.path().join("run")).unwrap().is_empty());

        // corruption is detected
        std::fs::write(tmp.path().join("run").join("a.csv"), b"tampered").unwrap();
        let bad = read.verify_outputs(&tmp.path().join("run")).unwrap();
        assert_eq!(bad, vec!["a.csv".to_string()]);
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let tmp = tempfile::tempdir().unwrap();
        write_atomic(&tmp.path().join("out.txt"), b"hello").unwrap();
        let entries: Vec<_> = std::fs::read_dir(tmp.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(entries, vec!["out.txt".to_string()]);
    }
}
