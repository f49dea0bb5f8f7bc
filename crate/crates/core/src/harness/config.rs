use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::Hyperparams;
use crate::error::{Error, Result};

/// Everything `train` needs besides the hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub episodes: u64,
    pub seed: u64,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub checkpoint_every: u64,
    pub deterministic: bool,
    pub eval_epsilon: f64,
    /// Hard cap on environment frames; 0 means no cap.
    pub max_frames: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            episodes: 140_000,
            seed: 0,
            metrics_path: PathBuf::from("metrics.csv"),
            checkpoint_path: PathBuf::from("checkpoint.snk"),
            checkpoint_every: 1_000,
            deterministic: true,
            eval_epsilon: 0.0,
            max_frames: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainConfig {
    pub hp: Hyperparams,
    pub run: RunSettings,
}

const HP_KEYS: &[&str] = &[
    "gamma",
    "eps_initial",
    "eps_final",
    "batch_size",
    "max_step",
    "learning_rate",
    "clip_norm",
    "random_frames",
    "eps_greedy_frames",
    "replay_capacity",
    "update_every",
    "target_sync_every",
];

const RUN_KEYS: &[&str] = &[
    "episodes",
    "seed",
    "metrics_path",
    "checkpoint_path",
    "checkpoint_every",
    "deterministic",
    "eval_epsilon",
    "max_frames",
];

impl TrainConfig {
    /// Parse a flat `key = value` file (TOML syntax, no tables). Every key
    /// must be a hyperparameter or run-setting name.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_owned(),
            }
        })?;
        let mut hp = toml::Table::new();
        let mut run = toml::Table::new();
        for (key, value) in table {
            if value.is_table() {
                return Err(Error::Config(format!(
                    "'{key}': nested tables are not allowed"
                )));
            }
            if HP_KEYS.contains(&key.as_str()) {
                hp.insert(key, value);
            } else if RUN_KEYS.contains(&key.as_str()) {
                run.insert(key, value);
            } else {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        let cfg = TrainConfig {
            hp: hp
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(e.message().to_owned()))?,
            run: run
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(e.message().to_owned()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = toml::to_string(&self.hp).expect("plain fields serialize");
        out.push_str(&toml::to_string(&self.run).expect("plain fields serialize"));
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.run.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.run.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.run.eval_epsilon) {
            return Err(Error::Config("eval_epsilon must be in [0, 1]".into()));
        }
        Ok(())
    }
}
