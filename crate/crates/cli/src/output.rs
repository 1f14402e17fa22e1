//! Atomic artifact writes and the per-run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Write via a temporary sibling file and rename, so readers never observe a
/// partially written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("output path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Collects artifacts written by one command and records them in a manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Read an input file and record its digest.
    pub fn read_input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = read_file(path)?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        write_atomic(path, bytes)?;
        log::info!("wrote {}", path.display());
        self.artifacts.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn artifacts(&self) -> &[FileDigest] {
        &self.artifacts
    }

    /// Write `<primary>.manifest.json` describing the run.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, seed: Option<u64>, primary: &Path) -> CliResult<PathBuf> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Internal(e.to_string()))?;
        let canonical = serde_json::to_vec(&config).map_err(|e| CliError::Internal(e.to_string()))?;
        let manifest = Manifest {
            tool: "evtgan",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_digest: sha256_hex(&canonical),
            config,
            seed,
            inputs: std::mem::take(&mut self.inputs),
            artifacts: std::mem::take(&mut self.artifacts),
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push(b'\n');
        let path = with_suffix(primary, "manifest.json");
        write_atomic(&path, &text)?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_digest: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
}

/// `dir/name.ext` -> `dir/name.<suffix>`; the primary extension is replaced.
pub fn with_suffix(primary: &Path, suffix: &str) -> PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    primary.with_file_name(format!("{stem}.{suffix}"))
}
