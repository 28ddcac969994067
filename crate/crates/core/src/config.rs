//! Run configuration. Bundled defaults live in `assets/defaults.toml`; a user
//! file may override any subset of keys.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{RandomizationSpec, WorkspaceConfig};

const DEFAULTS: &str = include_str!("../assets/defaults.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Length of the planned movement, start to contact-free end pose.
    pub duration_s: f64,
    pub fps: f64,
    /// Extra frames after contact labeled `NoGrasp`; 0 disables the tail.
    pub no_grasp_tail_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub per_pair: u32,
    pub master_seed: u64,
    /// Attempts per sequence before the pair is declared unreachable.
    pub max_attempts: u32,
    /// Write image files for every frame.
    pub render: bool,
    /// Draw part boxes into the label channel.
    pub label_parts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Count frames whose reference label is `NoGrasp` in per-frame accuracy.
    pub count_nograsp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub workspace: WorkspaceConfig,
    pub randomization: RandomizationSpec,
    pub trajectory: TrajectoryConfig,
    pub generation: GenerationConfig,
    pub eval: EvalConfig,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl Config {
    pub fn bundled() -> Config {
        toml::from_str(DEFAULTS).expect("bundled defaults parse")
    }

    pub fn bundled_text() -> &'static str {
        DEFAULTS
    }

    /// Defaults overlaid with `text`, then validated.
    pub fn from_overrides(text: &str) -> Result<Config, ConfigError> {
        let mut base: toml::Table = toml::from_str(DEFAULTS).expect("bundled defaults parse");
        let over: toml::Table = toml::from_str(text)?;
        merge(&mut base, over);
        let cfg: Config = toml::Value::Table(base).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_overrides(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.workspace.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.randomization.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let t = &self.trajectory;
        if !(t.duration_s.is_finite() && t.duration_s > 0.0) {
            return Err(ConfigError::Invalid(format!("trajectory.duration_s must be positive, got {}", t.duration_s)));
        }
        if !(t.fps.is_finite() && t.fps > 0.0) || t.duration_s * t.fps < 1.0 {
            return Err(ConfigError::Invalid("trajectory needs at least two frames".into()));
        }
        if !(t.no_grasp_tail_s.is_finite() && t.no_grasp_tail_s >= 0.0) {
            return Err(ConfigError::Invalid("trajectory.no_grasp_tail_s must be non-negative".into()));
        }
        if self.generation.per_pair == 0 || self.generation.max_attempts == 0 {
            return Err(ConfigError::Invalid("generation.per_pair and max_attempts must be positive".into()));
        }
        Ok(())
    }
}
