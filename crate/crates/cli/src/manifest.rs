//! Run manifest: what a config hash has produced so far.
//!
//! Timestamps live only here so every other artifact stays byte-identical
//! across reruns of the same config.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    /// Artifact name -> path relative to the artifact directory.
    pub artifacts: BTreeMap<String, String>,
    /// Command name -> unix seconds of its most recent completion.
    pub timestamps: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn new(config_hash: &str) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts: BTreeMap::new(),
            timestamps: BTreeMap::new(),
        }
    }

    /// Loads the manifest from `dir`, or starts a fresh one for this hash.
    pub fn load_or_new(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(config_hash));
        }
        let text = std::fs::read_to_string(&path)?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        if manifest.config_hash != config_hash {
            return Err(CliError::Data(format!(
                "manifest at {} belongs to config {}, expected {}",
                path.display(),
                manifest.config_hash,
                config_hash
            )));
        }
        Ok(manifest)
    }

    /// Records artifacts produced by `command` and persists the manifest.
    pub fn record(
        &mut self,
        dir: &Path,
        command: &str,
        artifacts: &[(&str, &str)],
    ) -> Result<(), CliError> {
        for (name, rel_path) in artifacts {
            if !dir.join(rel_path).exists() {
                return Err(CliError::Data(format!(
                    "artifact {rel_path} was not written"
                )));
            }
            self.artifacts.insert(name.to_string(), rel_path.to_string());
        }
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.timestamps.insert(command.to_string(), now);
        let text = serde_json::to_string_pretty(self).expect("manifest serialization");
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Path of a previously recorded artifact, as a data error if absent.
    pub fn require(&self, dir: &Path, name: &str, hint: &str) -> Result<std::path::PathBuf, CliError> {
        let rel = self.artifacts.get(name).ok_or_else(|| {
            CliError::Data(format!("missing artifact {name:?}; run `{hint}` first"))
        })?;
        let path = dir.join(rel);
        if !path.exists() {
            return Err(CliError::Data(format!(
                "artifact {} recorded but missing on disk; rerun `{hint}`",
                path.display()
            )));
        }
        Ok(path)
    }
}
