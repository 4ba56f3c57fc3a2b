//! Experiment configuration: defaults, flat key = value files, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::DriftProfile;

/// Master seed used when none is configured.
pub const DEFAULT_MASTER_SEED: u64 = 20_250_801;

/// How thresholds are produced for the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceChoice {
    MonteCarlo,
    Asymptotic,
}

impl ProvenanceChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "monte-carlo" => Ok(ProvenanceChoice::MonteCarlo),
            "asymptotic" => Ok(ProvenanceChoice::Asymptotic),
            other => Err(Error::Config(format!(
                "unknown provenance {other:?}; use monte-carlo or asymptotic"
            ))),
        }
    }
}

/// Full description of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub block_sizes: Vec<usize>,
    pub e0: Vec<f64>,
    /// Profile names resolvable by `DriftProfile::from_name`.
    pub profiles: Vec<String>,
    pub alpha: f64,
    pub target_power: f64,
    /// Null replications per threshold calibration.
    pub m0: usize,
    /// Replications per power point.
    pub m1: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub provenance: ProvenanceChoice,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            block_sizes: vec![250, 500, 1000, 2000, 4000],
            e0: vec![0.02, 0.05, 0.10],
            profiles: vec!["linear".into(), "sinusoidal".into(), "step".into()],
            alpha: 0.05,
            target_power: 0.8,
            m0: 10_000,
            m1: 5_000,
            seed: DEFAULT_MASTER_SEED,
            out_dir: PathBuf::from("out"),
            provenance: ProvenanceChoice::MonteCarlo,
        }
    }
}

const KNOWN_KEYS: &str = "block_sizes, e0, profiles, alpha, target_power, m0, m1, \
                          seed, out_dir, provenance";

impl ExperimentConfig {
    /// Defaults overridden by a flat `key = value` file. Lines starting
    /// with `#` and blank lines are ignored.
    pub fn from_flat_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", idx + 1))
            })?;
            cfg.apply_kv(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", idx + 1)))?;
        }
        Ok(cfg)
    }

    /// Apply one key = value override.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
            value
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Config(format!("bad {what} entry {s:?}")))
                })
                .collect()
        }
        match key {
            "block_sizes" => self.block_sizes = list(value, "block size")?,
            "e0" => self.e0 = list(value, "baseline rate")?,
            "profiles" => {
                self.profiles = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            "alpha" => {
                self.alpha = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad alpha {value:?}")))?
            }
            "target_power" => {
                self.target_power = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad target_power {value:?}")))?
            }
            "m0" => {
                self.m0 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad m0 {value:?}")))?
            }
            "m1" => {
                self.m1 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad m1 {value:?}")))?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad seed {value:?}")))?
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "provenance" => self.provenance = ProvenanceChoice::parse(value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?}; known keys: {KNOWN_KEYS}"
                )))
            }
        }
        Ok(())
    }

    /// Resolve the configured profile names.
    pub fn resolved_profiles(&self) -> Result<Vec<DriftProfile>> {
        self.profiles.iter().map(|s| DriftProfile::from_name(s)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() {
            return Err(Error::Config("block_sizes must be non-empty".into()));
        }
        if self.block_sizes.iter().any(|&n| n < 2) {
            return Err(Error::Config("block sizes must be >= 2".into()));
        }
        let mut ns = self.block_sizes.clone();
        ns.sort_unstable();
        if ns.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("block_sizes contains duplicates".into()));
        }
        if self.e0.is_empty() {
            return Err(Error::Config("e0 list must be non-empty".into()));
        }
        if self.e0.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Config("every e0 must lie in (0, 1)".into()));
        }
        let mut es = self.e0.clone();
        es.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if es.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("e0 list contains duplicates".into()));
        }
        if self.profiles.is_empty() {
            return Err(Error::Config("profiles list must be non-empty".into()));
        }
        let mut names = self.profiles.clone();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("profiles list contains duplicates".into()));
        }
        self.resolved_profiles()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.target_power > 0.0 && self.target_power < 1.0) {
            return Err(Error::Config(format!(
                "target_power must lie in (0, 1), got {}",
                self.target_power
            )));
        }
        if self.provenance == ProvenanceChoice::MonteCarlo && self.m0 < 1000 {
            return Err(Error::Config(format!(
                "Monte Carlo calibration needs m0 >= 1000, got {}",
                self.m0
            )));
        }
        if self.m1 == 0 {
            return Err(Error::Config("m1 must be >= 1".into()));
        }
        Ok(())
    }

    /// The e0 figures focus on: the median of the configured list.
    pub fn focus_e0(&self) -> f64 {
        let mut es = self.e0.clone();
        es.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        es[(es.len() - 1) / 2]
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_protocol() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.block_sizes, vec![250, 500, 1000, 2000, 4000]);
        assert_eq!(cfg.e0, vec![0.02, 0.05, 0.10]);
        assert_eq!(cfg.profiles.len(), 3);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.target_power, 0.8);
        assert_eq!(cfg.m0, 10_000);
        assert_eq!(cfg.m1, 5_000);
        assert_eq!(cfg.focus_e0(), 0.05);
    }

    #[test]
    fn flat_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lab.conf");
        std::fs::write(
            &path,
            "# comment\n\
             block_sizes = 100, 200\n\
             e0 = 0.1\n\
             profiles = step\n\
             alpha = 0.1\n\
             target_power = 0.75\n\
             m0 = 2000\n\
             m1 = 500\n\
             seed = 42\n\
             out_dir = scratch\n\
             provenance = asymptotic\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_flat_file(&path).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.block_sizes, vec![100, 200]);
        assert_eq!(cfg.e0, vec![0.1]);
        assert_eq!(cfg.profiles, vec!["step".to_string()]);
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.m0, 2000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.out_dir, PathBuf::from("scratch"));
        assert_eq!(cfg.provenance, ProvenanceChoice::Asymptotic);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.apply_kv("granularity", "7").is_err());
        assert!(cfg.apply_kv("alpha", "zero point one").is_err());
        assert!(cfg.apply_kv("provenance", "oracle").is_err());
        assert!(cfg.apply_kv("block_sizes", "100,abc").is_err());
    }

    #[test]
    fn validation_catches_bad_shapes() {
        let base = ExperimentConfig::default();
        let mut c = base.clone();
        c.block_sizes = vec![];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.block_sizes = vec![500, 500];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.e0 = vec![0.0];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.profiles = vec!["spiral".into()];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.m0 = 500;
        assert!(c.validate().is_err());
        c.provenance = ProvenanceChoice::Asymptotic;
        c.validate().unwrap();
    }

    #[test]
    fn focus_e0_is_the_median() {
        let mut cfg = ExperimentConfig::default();
        cfg.e0 = vec![0.3, 0.1, 0.2];
        assert_eq!(cfg.focus_e0(), 0.2);
        cfg.e0 = vec![0.1, 0.4];
        assert_eq!(cfg.focus_e0(), 0.1);
    }
}
