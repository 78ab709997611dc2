//! Run manifests: config snapshot, seeds and a SHA-256 per emitted file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// The effective config (after seed overrides) as TOML.
    pub config: String,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    /// Checksums `files` (relative to `out_dir`) into a new manifest.
    pub fn build(config: String, seeds: Vec<u64>, out_dir: &Path, files: &[String]) -> Result<Self, CliError> {
        let artifacts = files
            .iter()
            .map(|f| Ok(Artifact { path: f.clone(), sha256: sha256_file(&out_dir.join(f))? }))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Self { config, seeds, out_dir: out_dir.to_path_buf(), artifacts })
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(out_dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(out_dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(out_dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("bad manifest: {e}")))
    }
}

/// Re-hashes every artifact listed in `out_dir/manifest.json`. Returns the
/// paths whose checksum no longer matches (or that are missing).
pub fn verify_manifest(out_dir: &Path) -> Result<Vec<String>, CliError> {
    let manifest = RunManifest::read(out_dir)?;
    Ok(manifest
        .artifacts
        .iter()
        .filter(|a| sha256_file(&out_dir.join(&a.path)).map(|h| h != a.sha256).unwrap_or(true))
        .map(|a| a.path.clone())
        .collect())
}
