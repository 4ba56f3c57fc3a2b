//! Run manifest: a JSON record of what a sweep produced and how.
//!
//! Every artifact the tool writes is listed here together with the seed of
//! every simulation job, so a finished directory is self-describing and an
//! interrupted sweep can be resumed. Wall-clock fields are informational;
//! all scientific content in the CSV artifacts is a pure function of the
//! configuration.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRecord {
    /// Stable job name, e.g. `calibrate n=500 e0=0.05`.
    pub name: String,
    /// Derived seed actually used for the job.
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// What the file is, e.g. `thresholds`, `power-cell`, `figure`.
    pub role: String,
    /// Path relative to the output directory.
    pub path: String,
    /// Wall-clock spent producing it in this run; 0 when reused as-is.
    pub wall_ms: u64,
    /// `written` or `reused`.
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub created_unix_ms: u64,
    /// Interpolation rule used for threshold-crossing estimates.
    pub interpolation: String,
    pub config: ExperimentConfig,
    pub jobs: Vec<JobRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_ms: now_ms(),
            interpolation: "piecewise-linear".to_string(),
            config: config.clone(),
            jobs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Load the manifest at `path` if present, else a fresh one. A fresh
    /// manifest is also returned when the configuration stored on disk
    /// differs from the current one: mixing sweeps in one directory is
    /// allowed only for identical configurations.
    pub fn load_or_new(path: &Path, config: &ExperimentConfig) -> Result<Self> {
        if !path.exists() {
            return Ok(RunManifest::new(config));
        }
        let text = std::fs::read_to_string(path)?;
        let parsed: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if &parsed.config != config {
            return Ok(RunManifest::new(config));
        }
        Ok(parsed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Insert or replace a job record by name.
    pub fn upsert_job(&mut self, name: &str, seed: u64) {
        if let Some(j) = self.jobs.iter_mut().find(|j| j.name == name) {
            j.seed = seed;
        } else {
            self.jobs.push(JobRecord { name: name.to_string(), seed });
        }
    }

    /// Insert or replace an artifact record by path.
    pub fn upsert_artifact(&mut self, role: &str, path: &str, wall_ms: u64, status: &str) {
        if let Some(a) = self.artifacts.iter_mut().find(|a| a.path == path) {
            a.role = role.to_string();
            a.wall_ms = wall_ms;
            a.status = status.to_string();
        } else {
            self.artifacts.push(ArtifactRecord {
                role: role.to_string(),
                path: path.to_string(),
                wall_ms,
                status: status.to_string(),
            });
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
