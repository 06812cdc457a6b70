//! Artifacts are staged in memory and written only once a command has
//! finished computing, so a failed command leaves nothing behind. Every file
//! is listed with its SHA-256 in a manifest written last.

use std::fs;
use std::path::{Path, PathBuf};

use gfmsim::scenarios::ModeRun;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Outcome of one simulated mode as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub mode: String,
    pub scr: f64,
    pub stable: bool,
    /// Blew up numerically or failed the stability detector.
    pub diverged: bool,
    pub numerically_diverged: bool,
    pub diverged_at: Option<f64>,
    pub diverged_state: Option<String>,
    pub peak_current: f64,
    pub peak_vdc_dev: f64,
    pub recovered_post_fault: Option<bool>,
}

impl RunRecord {
    pub fn of(run: &ModeRun) -> Self {
        let v = &run.verdict;
        Self {
            mode: run.mode.to_string(),
            scr: run.series.meta.scr,
            stable: v.stable,
            diverged: v.diverged || !v.stable,
            numerically_diverged: v.diverged,
            diverged_at: run.series.meta.diverged_at,
            diverged_state: run.series.meta.diverged_state.clone(),
            peak_current: v.peak_current,
            peak_vdc_dev: v.peak_vdc_dev,
            recovered_post_fault: v.recovered_post_fault,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Option<String>,
    pub scenario: Option<String>,
    pub dt: f64,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub diverged: bool,
    pub exit_code: u8,
    pub runs: Vec<RunRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&Path>, dt: f64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.map(|p| p.display().to_string()),
            scenario: None,
            dt,
            seed: None,
            output_dir: String::new(),
            diverged: false,
            exit_code: 0,
            runs: Vec::new(),
            artifacts: Vec::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the artifacts into `dir`, then the manifest under `manifest_name`.
/// Returns the manifest path.
pub fn emit(
    dir: &Path,
    artifacts: &[Artifact],
    mut manifest: Manifest,
    manifest_name: &str,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    manifest.output_dir = dir.display().to_string();
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(io_error(&path))?;
        manifest.artifacts.push(ArtifactRecord {
            file: a.name.clone(),
            bytes: a.bytes.len(),
            sha256: sha256_hex(&a.bytes),
        });
    }
    let path = dir.join(manifest_name);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    fs::write(&path, text).map_err(io_error(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
