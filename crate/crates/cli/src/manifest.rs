use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hedge_core::training::{ExperimentConfig, Seeds, SCHEMA_VERSION};
use hedge_core::HedgeError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Runtime};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// A file written by a run, with its SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    /// Hashes `path`; the recorded path is relative to `root` when possible.
    pub fn of(root: &Path, path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        let shown = path.strip_prefix(root).unwrap_or(path);
        Ok(Artifact { path: shown.display().to_string(), sha256 })
    }
}

/// Everything needed to rerun a command: the full configuration, seeds,
/// runtime flags and the files it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub schema_version: u32,
    pub command: String,
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub threads: usize,
    pub deterministic: bool,
    /// RFC 3339, UTC
    pub started_at: String,
    pub finished_at: String,
    pub seeds: Seeds,
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
    #[serde(default)]
    pub artifacts: BTreeMap<String, Artifact>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, preset: Option<String>, rt: Runtime) -> Self {
        let now = timestamp();
        RunManifest {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            experiment: config.key(),
            preset,
            threads: rt.threads,
            deterministic: rt.deterministic,
            started_at: now.clone(),
            finished_at: now,
            seeds: config.seeds,
            summary: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn add_artifact(&mut self, name: &str, root: &Path, path: &Path) -> Result<(), CliError> {
        self.artifacts.insert(name.to_string(), Artifact::of(root, path)?);
        Ok(())
    }

    pub fn artifact_path(&self, root: &Path, name: &str) -> Option<PathBuf> {
        self.artifacts.get(name).map(|a| root.join(&a.path))
    }

    pub fn finish(&mut self) {
        self.finished_at = timestamp();
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let text = toml::to_string(self).map_err(|e| HedgeError::Config(e.to_string()))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let m: RunManifest = toml::from_str(text).map_err(|e| HedgeError::Config(e.to_string()))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(HedgeError::Config(format!(
                "manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                m.schema_version
            ))
            .into());
        }
        m.config.validate()?;
        Ok(m)
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Reads a configuration file or a run manifest; a manifest also returns the
/// preset it was created from.
pub fn load_experiment(path: &Path) -> Result<(ExperimentConfig, Option<String>), CliError> {
    let text = fs::read_to_string(path)?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| HedgeError::Config(format!("{}: {e}", path.display())))?;
    if table.contains_key("engine_version") {
        let m = RunManifest::from_toml_str(&text)?;
        Ok((m.config, m.preset))
    } else {
        Ok((ExperimentConfig::from_toml_str(&text)?, None))
    }
}
