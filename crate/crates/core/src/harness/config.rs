//! Experiment configuration and its flat `key = value` text form.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{PlannerConfig, Propagation, RewardMode};
use crate::env::EnvOverrides;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::plan::PlannerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: String,
    pub planner: PlannerKind,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub planner_config: PlannerConfig,
    /// Random-action episodes collected before the first model fit.
    pub warmup_episodes: usize,
    pub train_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_units: usize,
    /// Lower bound on predicted state variances, in state units.
    pub model_var_floor: f64,
    pub buffer_capacity: usize,
    pub env_overrides: EnvOverrides,
    /// Where results go. Left out of the serialized form so that identical runs
    /// written to different directories produce identical summaries.
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: "pendulum".into(),
            planner: PlannerKind::MctsCem,
            episodes: 10,
            trials: 5,
            seed: 0,
            planner_config: PlannerConfig::default(),
            warmup_episodes: 1,
            train_epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            hidden_units: 64,
            model_var_floor: 1e-4,
            buffer_capacity: 100_000,
            env_overrides: EnvOverrides::default(),
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key} expects true/false, got {value:?}"))),
    }
}

impl ExperimentConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            members: self.planner_config.ensemble_m,
            hidden: self.hidden_units,
            var_floor: self.model_var_floor,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
        }
    }

    /// Sets one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.planner_config;
        match key {
            "env" => self.env = value.to_string(),
            "planner" => self.planner = value.parse()?,
            "episodes" => self.episodes = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "warmup_episodes" => self.warmup_episodes = parse(key, value)?,
            "train_epochs" => self.train_epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "hidden_units" => self.hidden_units = parse(key, value)?,
            "model_var_floor" => self.model_var_floor = parse(key, value)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, value)?,
            "step_penalty" => self.env_overrides.step_penalty = Some(parse(key, value)?),
            "max_episode_steps" => self.env_overrides.max_episode_steps = Some(parse(key, value)?),
            "horizon" => p.horizon = parse(key, value)?,
            "n_candidates" => p.n_candidates = parse(key, value)?,
            "k_elite" => p.k_elite = parse(key, value)?,
            "cem_iters" => p.cem_iters = parse(key, value)?,
            "lambda" => p.lambda = parse(key, value)?,
            "gamma" => p.gamma = parse(key, value)?,
            "n_sim" => p.n_sim = parse(key, value)?,
            "n_children" => p.n_children = parse(key, value)?,
            "c_ucb" => p.c_ucb = parse(key, value)?,
            "rollout_horizon" => p.rollout_horizon = parse(key, value)?,
            "max_depth" => p.max_depth = parse(key, value)?,
            "knn_k" => p.knn_k = parse(key, value)?,
            "ensemble_m" => p.ensemble_m = parse(key, value)?,
            "ev_samples" => p.ev_samples = parse(key, value)?,
            "var_floor" => p.var_floor = parse(key, value)?,
            "reward_mode" => {
                p.reward_mode = match value {
                    "oracle" => RewardMode::Oracle,
                    "learned" => RewardMode::Learned,
                    _ => return Err(Error::Config(format!("reward_mode expects oracle/learned, got {value:?}"))),
                }
            }
            "propagation" => {
                p.propagation = match value {
                    "mean" => Propagation::Mean,
                    "sample" => Propagation::Sample,
                    _ => return Err(Error::Config(format!("propagation expects mean/sample, got {value:?}"))),
                }
            }
            "clamp_ev" => p.clamp_ev = parse_bool(key, value)?,
            "warm_start" => p.warm_start = parse_bool(key, value)?,
            "intrinsic_rollout" => p.intrinsic_rollout = parse_bool(key, value)?,
            "workers" => p.workers = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_kv(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.trials == 0 {
            return Err(Error::Config("episodes and trials must be at least 1".into()));
        }
        if self.warmup_episodes == 0 || self.train_epochs == 0 {
            return Err(Error::Config("warmup_episodes and train_epochs must be at least 1 to fit the first model".into()));
        }
        if self.batch_size == 0 || self.hidden_units == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("batch_size, hidden_units and buffer_capacity must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.model_var_floor > 0.0 && self.model_var_floor.is_finite()) {
            return Err(Error::Config("model_var_floor must be positive".into()));
        }
        if self.planner_config.ensemble_m < 2 {
            return Err(Error::Config("ensemble_m must be at least 2".into()));
        }
        self.planner_config.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let cfg = ExperimentConfig::from_kv(
            "# demo\nenv = sparse-mountain-car\nplanner = cem  # baseline\nepisodes=3\nlambda = 0.5\nreward_mode = learned\nclamp_ev = true\nstep_penalty = -0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.env, "sparse-mountain-car");
        assert_eq!(cfg.planner, PlannerKind::Cem);
        assert_eq!(cfg.episodes, 3);
        assert_eq!(cfg.planner_config.lambda, 0.5);
        assert_eq!(cfg.planner_config.reward_mode, RewardMode::Learned);
        assert!(cfg.planner_config.clamp_ev);
        assert_eq!(cfg.env_overrides.step_penalty, Some(-0.05));
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(ExperimentConfig::from_kv("colour = red").is_err());
        assert!(ExperimentConfig::from_kv("planner = ppo").is_err());
        assert!(ExperimentConfig::from_kv("episodes = many").is_err());
        assert!(ExperimentConfig::from_kv("just words").is_err());
    }

    #[test]
    fn validation() {
        ExperimentConfig::default().validate().unwrap();
        let mut c = ExperimentConfig::default();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.planner_config.ensemble_m = 1;
        assert!(c.validate().is_err());
    }
}
