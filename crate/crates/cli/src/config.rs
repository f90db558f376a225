//! Experiment configuration: file format, override layering, and hashing.
//!
//! Precedence is flag > environment > config file > built-in default. The
//! flag and environment layers arrive through clap (flags declare their
//! `RASHOMON_*` variables); whatever survives that layering lands in
//! [`Overrides`] and is folded into the parsed file here.
//!
//! The resolved config is content-addressed: artifacts live under
//! `<output_dir>/<hash12>/`, where the hash covers every field that affects
//! results (the output directory itself is excluded), so reports from
//! different configurations can never silently mix.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rashomon_core::{ColumnKind, Schema, TrainConfig};

use crate::error::CliError;

/// One feature column in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Dataset location and schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub label_column: String,
    pub positive_label: String,
    pub columns: Vec<ColumnSpec>,
}

impl DatasetConfig {
    pub fn schema(&self) -> Result<Schema, CliError> {
        Schema::new(
            self.columns
                .iter()
                .map(|c| (c.name.clone(), c.kind))
                .collect(),
            &self.label_column,
            &self.positive_label,
        )
        .map_err(|e| CliError::Config(format!("invalid schema: {e}")))
    }
}

/// Neighborhood sampler settings; the seed is derived from `base_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub k: usize,
    pub gaussian_std: f64,
    pub radius_sigma: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            k: 30,
            gaussian_std: 0.1,
            radius_sigma: 0.5,
        }
    }
}

/// Synthetic-class and grid settings for `verify-bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySettings {
    /// One of `linear`, `radial`, `mixture`.
    pub base: String,
    pub model_noise_std: f64,
    pub dim: usize,
    pub trials: usize,
    pub k_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
    /// Evaluation centers for the consistency-bound check; the first is the
    /// origin, the rest are seeded uniform draws.
    pub n_centers: usize,
    /// Diagnostic multiplier on the estimated beta (1.0 = honest bound).
    pub beta_scale: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            base: "linear".into(),
            model_noise_std: 0.15,
            dim: 4,
            trials: 10_000,
            k_grid: vec![10, 30, 100],
            eps_grid: vec![0.05, 0.1, 0.2, 0.4],
            n_centers: 2,
            beta_scale: 1.0,
        }
    }
}

/// The experiment configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_n_shots")]
    pub n_shots: usize,
    #[serde(default = "default_n_models")]
    pub n_models: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub reference_index: usize,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub verify: VerifySettings,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_n_shots() -> usize {
    128
}

fn default_n_models() -> usize {
    40
}

fn default_delta() -> f64 {
    0.02
}

/// Values that arrived via flags or `RASHOMON_*` environment variables.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub n_shots: Option<usize>,
    pub n_models: Option<usize>,
    pub delta: Option<f64>,
    pub trials: Option<usize>,
    pub beta_scale: Option<f64>,
}

impl ExperimentConfig {
    /// Parses a config file and folds in the override layer.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config = Self::parse(&text)?;
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.base_seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(n) = overrides.n_shots {
            self.n_shots = n;
        }
        if let Some(n) = overrides.n_models {
            self.n_models = n;
        }
        if let Some(d) = overrides.delta {
            self.delta = d;
        }
        if let Some(t) = overrides.trials {
            self.verify.trials = t;
        }
        if let Some(s) = overrides.beta_scale {
            self.verify.beta_scale = s;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_shots == 0 {
            return Err(CliError::Config("n_shots must be >= 1".into()));
        }
        if self.n_models == 0 {
            return Err(CliError::Config("n_models must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Config(format!(
                "delta {} must lie in (0, 1)",
                self.delta
            )));
        }
        if self.reference_index >= self.n_models {
            return Err(CliError::Config(format!(
                "reference_index {} out of range for {} models",
                self.reference_index, self.n_models
            )));
        }
        if self.dataset.columns.is_empty() {
            return Err(CliError::Config("dataset.columns is empty".into()));
        }
        if self.sampler.k == 0 {
            return Err(CliError::Config("sampler.k must be >= 1".into()));
        }
        if self.verify.trials == 0 {
            return Err(CliError::Config("verify.trials must be >= 1".into()));
        }
        if self.verify.k_grid.is_empty() || self.verify.eps_grid.is_empty() {
            return Err(CliError::Config("verify grids must be nonempty".into()));
        }
        if self.verify.n_centers == 0 {
            return Err(CliError::Config("verify.n_centers must be >= 1".into()));
        }
        crate::commands::parse_base_fn(&self.verify.base)?;
        Ok(())
    }

    /// Hash over everything that affects results; the output directory is
    /// only a location and is excluded.
    pub fn content_hash(&self) -> String {
        let mut for_hash = self.clone();
        for_hash.output_dir = PathBuf::new();
        let mut hasher = Sha256::new();
        hasher.update(for_hash.render().as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..12].to_string()
    }

    /// Artifact directory for this config: `<output_dir>/<hash12>`.
    pub fn artifact_dir(&self) -> PathBuf {
        self.output_dir.join(self.content_hash())
    }
}
