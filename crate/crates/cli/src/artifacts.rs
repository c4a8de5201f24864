//! Output directory bookkeeping, config loading and the run manifest.

use crate::error::{CliError, CliResult};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub git: Option<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub config: Value,
    pub started_unix_s: u64,
    pub wall_clock_ms: f64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects artifacts written during one run.
pub struct Out {
    dir: PathBuf,
    files: Vec<FileEntry>,
    clock: Instant,
    started: u64,
}

impl Out {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), clock: Instant::now(), started })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry { path: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Renders into a buffer with a core writer and stores the result.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> flagseq_core::Result<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn finish(self, command: &str, seed: Option<u64>, config: Value) -> CliResult<RunManifest> {
        let m = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            git: option_env!("FLAGSEQ_GIT_REV").map(str::to_string),
            seed,
            threads: rayon::current_num_threads(),
            config,
            started_unix_s: self.started,
            wall_clock_ms: self.clock.elapsed().as_secs_f64() * 1e3,
            files: self.files,
        };
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        fs::write(self.dir.join(MANIFEST), s)?;
        Ok(m)
    }
}

/// Parses a JSON config, returning the typed value and the raw snapshot.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<(T, Value)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let typed = serde_json::from_value(raw.clone()).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((typed, raw))
}

/// Paths inside a config are relative to the config file.
pub fn resolve(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config.parent().map(|d| d.join(p)).unwrap_or_else(|| p.to_path_buf())
}
