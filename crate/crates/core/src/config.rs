//! The JSON run configuration: every tunable in one file.
//!
//! Missing keys take their defaults and unknown keys are rejected. Errors
//! name the offending key path, e.g. `ppo.gamma must be in (0,1]`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{build_floorplan, EnvConfig};
use crate::error::{Error, Result};
use crate::imitation::BcConfig;
use crate::policy::NetConfig;
use crate::ppo::TrainConfig;
use crate::reward::RewardConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    /// Oracle episodes generated when the demo file does not exist.
    pub episodes: usize,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            episodes: 60,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Episodes in a full evaluation report.
    pub episodes: usize,
    /// Episodes used to score each candidate for selection.
    pub selection_episodes: usize,
    pub select_fraction: f64,
    pub seed: u64,
    pub troupe_agents: usize,
    /// Sample actions instead of using the distribution mean.
    pub stochastic: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 50,
            selection_episodes: 20,
            select_fraction: 0.3,
            seed: 1000,
            troupe_agents: 6,
            stochastic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub demo_file: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub log_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            demo_file: PathBuf::from("demos.jsonl"),
            checkpoint_dir: PathBuf::from("checkpoints"),
            log_dir: PathBuf::from("logs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub net: NetConfig,
    pub bc: BcConfig,
    pub ppo: TrainConfig,
    pub demos: DemoConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Parse and validate JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path.is_empty() {
                Error::Config(format!("config: {inner}"))
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        build_floorplan(&self.env).map_err(|e| Error::Config(format!("env: {e}")))?;
        self.reward.validate()?;
        self.net.validate()?;
        self.bc.validate()?;
        self.ppo.validate()?;
        if self.demos.episodes == 0 {
            return Err(Error::Config("demos.episodes must be at least 1".into()));
        }
        let e = &self.eval;
        if e.episodes == 0 {
            return Err(Error::Config("eval.episodes must be at least 1".into()));
        }
        if e.selection_episodes == 0 {
            return Err(Error::Config(
                "eval.selection_episodes must be at least 1".into(),
            ));
        }
        if !(e.select_fraction > 0.0 && e.select_fraction <= 1.0) {
            return Err(Error::Config(
                "eval.select_fraction must be in (0,1]".into(),
            ));
        }
        if e.troupe_agents == 0 {
            return Err(Error::Config(
                "eval.troupe_agents must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Write the fully resolved configuration to `dir/resolved_config.json`.
    pub fn echo_to(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("resolved_config.json");
        fs::write(&path, self.to_json() + "\n")?;
        Ok(path)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}
