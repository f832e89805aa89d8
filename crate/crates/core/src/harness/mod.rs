//! Multi-trial experiment runner.
//!
//! Every planner runs through the same loop: a random warmup episode seeds the
//! replay buffer, the ensemble is fit, and then each episode plans, acts,
//! records and retrains. Only the `plan` call differs between planners.

mod config;
mod output;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;
pub use output::{
    emit_results, read_steps_csv, write_aggregate_csv, EpisodeSummary, RunSummary, StepLogWriter, AGGREGATE_FILE,
    STEPS_FILE, SUMMARY_FILE,
};

use crate::env::{make_env, Environment, Episode};
use crate::error::{Error, Result};
use crate::model::{EnsembleModel, ReplayBuffer};
use crate::plan::{make_planner, PlanContext, Planner};
use crate::rng::{stream, StreamKey};
use crate::types::{Action, Transition};

// stream labels
const MODEL_INIT: u64 = 1;
const WARMUP: u64 = 2;
const TRAIN: u64 = 3;
const RESET: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub trial: usize,
    pub episode: usize,
    pub rewards: Vec<f64>,
    /// Sum of `rewards`, accumulated in step order.
    pub cumulative_reward: f64,
    /// Wall time of the episode and the refit after it. Not written to disk.
    pub duration: Duration,
    /// Mean last-epoch training loss after the post-episode refit.
    pub model_loss: Option<f64>,
}

impl EpisodeLog {
    pub fn new(trial: usize, episode: usize, rewards: Vec<f64>, model_loss: Option<f64>) -> Self {
        let cumulative_reward = rewards.iter().sum();
        EpisodeLog { trial, episode, rewards, cumulative_reward, duration: Duration::ZERO, model_loss }
    }
}

/// Mean and population standard deviation of cumulative reward at one episode
/// index across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeAggregate {
    pub episode: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn aggregate(logs: &[EpisodeLog]) -> Result<Vec<EpisodeAggregate>> {
    if logs.is_empty() {
        return Err(Error::InvalidArgument("no episode logs".into()));
    }
    let trials: BTreeSet<usize> = logs.iter().map(|l| l.trial).collect();
    let episodes: BTreeSet<usize> = logs.iter().map(|l| l.episode).collect();
    let cells: BTreeSet<(usize, usize)> = logs.iter().map(|l| (l.trial, l.episode)).collect();
    if cells.len() != logs.len() || cells.len() != trials.len() * episodes.len() {
        return Err(Error::InvalidArgument(format!(
            "logs do not form a full grid: {} logs over {} trials x {} episodes",
            logs.len(),
            trials.len(),
            episodes.len()
        )));
    }
    Ok(episodes
        .into_iter()
        .map(|e| {
            let mut values: Vec<(usize, f64)> =
                logs.iter().filter(|l| l.episode == e).map(|l| (l.trial, l.cumulative_reward)).collect();
            values.sort_by_key(|(t, _)| *t);
            let n = values.len() as f64;
            let mean = values.iter().map(|(_, v)| v).sum::<f64>() / n;
            let var = values.iter().map(|(_, v)| (v - mean) * (v - mean)).sum::<f64>() / n;
            EpisodeAggregate { episode: e, mean, std: var.sqrt() }
        })
        .collect())
}

fn random_action(env: &dyn Environment, rng: &mut impl Rng) -> Action {
    let b = &env.spec().action_bounds;
    Action::new(b.low().iter().zip(b.high()).map(|(l, h)| rng.gen_range(*l..=*h)).collect())
}

/// Runs `cfg` with the planner it names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EpisodeLog>> {
    let kind = cfg.planner;
    run_experiment_with(cfg, &mut || make_planner(kind), &mut |_| {})
}

/// Runs `cfg` with planners from `make_planner` (one per trial), calling
/// `observer` after every episode. When `cfg.out` is set, `steps.csv` grows as
/// episodes finish and the aggregate and summary files are written at the end.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    make_planner: &mut dyn FnMut() -> Box<dyn Planner>,
    observer: &mut dyn FnMut(&EpisodeLog),
) -> Result<Vec<EpisodeLog>> {
    cfg.validate()?;
    let env = make_env(&cfg.env, &cfg.env_overrides)?;
    let env: &dyn Environment = env.as_ref();
    let spec = env.spec().clone();
    let mut sink = match &cfg.out {
        Some(dir) => Some(StepLogWriter::create(dir)?),
        None => None,
    };
    let mut logs = Vec::with_capacity(cfg.trials * cfg.episodes);
    for trial in 0..cfg.trials {
        let seed = cfg.seed.wrapping_add(trial as u64);
        let mut model = EnsembleModel::new(
            spec.state_dim,
            spec.action_dim,
            cfg.model_config(),
            stream(seed, &[MODEL_INIT]).gen(),
        )?;
        let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
        for w in 0..cfg.warmup_episodes {
            let mut rng = stream(seed, &[WARMUP, w as u64]);
            let mut ep = Episode::start(env, &mut rng);
            while !ep.is_done() {
                let state = ep.state().clone();
                let action = random_action(env, &mut rng);
                let r = ep.step(&action)?;
                buffer.push(Transition { state, action, next_state: r.next_state, reward: r.reward, done: r.done });
            }
        }
        model.train(&buffer, cfg.train_epochs, &mut stream(seed, &[TRAIN, 0]))?;

        let mut planner = make_planner();
        for e in 0..cfg.episodes {
            let started = Instant::now();
            planner.reset();
            let mut ep = Episode::start(env, &mut stream(seed, &[RESET, e as u64]));
            let mut rewards = Vec::with_capacity(spec.max_episode_steps);
            while !ep.is_done() {
                let state = ep.state().clone();
                let ctx = PlanContext::for_env(&model, env, &cfg.planner_config);
                let key = StreamKey { trial: trial as u64, episode: e as u64, step: ep.steps() as u64, worker: 0 };
                let action = planner.plan(&state, &ctx, &mut key.rng(seed))?;
                let action = crate::types::clip_action(&action, &spec.action_bounds);
                let r = ep.step(&action)?;
                rewards.push(r.reward);
                buffer.push(Transition { state, action, next_state: r.next_state, reward: r.reward, done: r.done });
            }
            let report = model.train(&buffer, cfg.train_epochs, &mut stream(seed, &[TRAIN, e as u64 + 1]))?;
            let mut log = EpisodeLog::new(trial, e, rewards, report.final_loss());
            log.duration = started.elapsed();
            if let Some(s) = sink.as_mut() {
                s.append(&log)?;
            }
            observer(&log);
            logs.push(log);
        }
    }
    if let Some(dir) = &cfg.out {
        emit_results(cfg, &logs, &aggregate(&logs)?, dir)?;
    }
    Ok(logs)
}
