use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::DataSpec;
use crate::error::{Error, Result};
use crate::federation::{Algorithm, FederationConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub fn default_epsilon_grid() -> Vec<f64> {
    vec![3.0, 4.0, 5.0, 10.0, 15.0]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

/// A complete experiment description. Only `schema_version` is required;
/// every other field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Synthetic data to generate, one federation per seed (the run seed is
    /// also the data seed). Ignored when `data_dir` is set.
    #[serde(default)]
    pub data: DataSpec,
    /// A directory written by `generate-data`; shared by every seed.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub training: FederationConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Budgets visited by a sweep.
    #[serde(default = "default_epsilon_grid")]
    pub epsilon_grid: Vec<f64>,
    /// Algorithms visited by a sweep.
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            data: DataSpec::default(),
            data_dir: None,
            training: FederationConfig::default(),
            seeds: default_seeds(),
            epsilon_grid: default_epsilon_grid(),
            algorithms: default_algorithms(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let as_config = |e: Error| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        };
        self.training.validate().map_err(as_config)?;
        if self.data_dir.is_none() {
            self.data.validate().map_err(as_config)?;
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.epsilon_grid.is_empty() || self.epsilon_grid.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("epsilon grid must hold positive budgets".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.epsilon_grid, vec![3.0, 4.0, 5.0, 10.0, 15.0]);
        assert_eq!(cfg.training.delta, 1e-4);
        assert_eq!(cfg.training.local_epochs, 1);
        assert_eq!(cfg.training.rounds, 200);
        assert_eq!(cfg.training.batch_size, 32);
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for text in [
            r#"{}"#,
            r#"{"schema_version": 2}"#,
            r#"{"schema_version": 1, "seeds": []}"#,
            r#"{"schema_version": 1, "training": {"epsilon": -1}}"#,
            r#"{"schema_version": 1, "surprise": true}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }
}
