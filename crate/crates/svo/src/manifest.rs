//! Run manifests: the command that produced a directory, its inputs and
//! outputs with SHA-256 digests, and wall-clock stamps.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cli::Command;
use crate::config::CONFIG_VERSION;
use crate::error::{io_error, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
    /// False for files holding time measurements, which legitimately
    /// differ between identical runs.
    pub deterministic: bool,
}

impl FileEntry {
    pub fn hash(name: &str, path: &Path, deterministic: bool) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
            deterministic,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub config_version: u32,
    /// The invocation, with input paths made absolute.
    pub command: Command,
    pub seed: Option<u64>,
    /// Fully resolved settings of the run.
    pub config: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    /// Output paths are relative to the manifest's directory.
    pub outputs: Vec<FileEntry>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(io_error(path))?))
}

impl Manifest {
    pub fn new(command: Command, seed: Option<u64>, config: serde_json::Value, started_unix_ms: u128) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_version: CONFIG_VERSION,
            command,
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms,
            finished_unix_ms: started_unix_ms,
        }
    }

    /// Records an output file written under `dir`.
    pub fn add_output(&mut self, dir: &Path, file: &str, deterministic: bool) -> Result<()> {
        let mut entry = FileEntry::hash(file, &dir.join(file), deterministic)?;
        entry.path = PathBuf::from(file);
        self.outputs.push(entry);
        Ok(())
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.push(FileEntry::hash(name, path, true)?);
        Ok(())
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.finished_unix_ms = unix_ms();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(io_error(&path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Config {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
