//! What every planner sees: the model, a reward source, bounds and settings.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{PlannerConfig, Propagation, RewardMode};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::freenergy::{epistemic_breakdown, EpistemicParams};
use crate::model::{DynamicsModel, EnsemblePrediction};
use crate::rng::RngStream;
use crate::types::{Action, ActionBounds, State};

#[derive(Clone, Copy)]
pub enum RewardSource<'a> {
    Oracle(&'a dyn Environment),
    /// Use the ensemble's reward head.
    Learned,
}

impl std::fmt::Debug for RewardSource<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RewardSource::Oracle(env) => write!(f, "Oracle({})", env.spec().name),
            RewardSource::Learned => f.write_str("Learned"),
        }
    }
}

#[derive(Clone, Copy)]
pub struct PlanContext<'a> {
    pub model: &'a dyn DynamicsModel,
    pub reward: RewardSource<'a>,
    pub bounds: &'a ActionBounds,
    pub cfg: &'a PlannerConfig,
}

/// Randomness consumed by one model step. Supplying it up front lets many
/// candidates share identical noise.
#[derive(Debug, Clone, Default)]
pub struct StepNoise {
    /// Standard normals for the epistemic sample set; empty skips the estimate.
    pub ev: Vec<f64>,
    /// Member selector and standard normals for sampled propagation.
    pub propagation: Option<(f64, Vec<f64>)>,
}

impl StepNoise {
    pub fn draw(ctx: &PlanContext<'_>, with_ev: bool, rng: &mut RngStream) -> Self {
        let d = ctx.model.state_dim();
        let ev = if with_ev {
            let n = ctx.model.n_members() * ctx.cfg.ev_samples * d;
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        } else {
            Vec::new()
        };
        let propagation = match ctx.cfg.propagation {
            Propagation::Mean => None,
            Propagation::Sample => Some((rng.gen::<f64>(), (0..d).map(|_| rng.sample(StandardNormal)).collect())),
        };
        StepNoise { ev, propagation }
    }
}

/// Outcome of advancing the model one step.
#[derive(Debug, Clone)]
pub struct ModelStep {
    pub next: State,
    pub reward: f64,
    pub ev: Option<f64>,
}

impl<'a> PlanContext<'a> {
    pub fn new(model: &'a dyn DynamicsModel, reward: RewardSource<'a>, bounds: &'a ActionBounds, cfg: &'a PlannerConfig) -> Self {
        PlanContext { model, reward, bounds, cfg }
    }

    /// Context whose reward source follows `cfg.reward_mode`.
    pub fn for_env(model: &'a dyn DynamicsModel, env: &'a dyn Environment, cfg: &'a PlannerConfig) -> Self {
        let reward = match cfg.reward_mode {
            RewardMode::Oracle => RewardSource::Oracle(env),
            RewardMode::Learned => RewardSource::Learned,
        };
        PlanContext { model, reward, bounds: &env.spec().action_bounds, cfg }
    }

    pub fn ev_params(&self) -> EpistemicParams {
        EpistemicParams { k: self.cfg.knn_k, samples_per_member: self.cfg.ev_samples, clamp_at_zero: self.cfg.clamp_ev }
    }

    fn reward_of(&self, state: &State, action: &Action, pred: &EnsemblePrediction) -> f64 {
        match self.reward {
            RewardSource::Oracle(env) => env.reward(state, action),
            RewardSource::Learned => pred.mean_reward(),
        }
    }

    /// Reward of `(state, action)`, then the model's next state.
    pub fn step(&self, state: &State, action: &Action, noise: &StepNoise) -> Result<ModelStep> {
        let pred = self.model.predict(state, action)?;
        let reward = self.reward_of(state, action, &pred);
        if !reward.is_finite() {
            return Err(Error::InvalidState(format!("non-finite reward at {:?}", state.0)));
        }
        let ev = if noise.ev.is_empty() {
            None
        } else {
            Some(epistemic_breakdown(&pred, &self.ev_params(), &noise.ev)?.value)
        };
        let next = match &noise.propagation {
            None => pred.mean_state(),
            Some((u, z)) => pred.sample_next_from_noise(*u, z),
        };
        if !next.is_finite() {
            return Err(Error::InvalidState("model produced a non-finite state".into()));
        }
        Ok(ModelStep { next, reward, ev })
    }
}

/// The three compared planners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Cem,
    MctsRandom,
    MctsCem,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Cem, PlannerKind::MctsRandom, PlannerKind::MctsCem];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Cem => "cem",
            PlannerKind::MctsRandom => "mcts-random",
            PlannerKind::MctsCem => "mcts-cem",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown planner {s:?} (expected cem, mcts-random or mcts-cem)")))
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A receding-horizon controller: one call per environment step.
pub trait Planner {
    fn plan(&mut self, state: &State, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<Action>;

    /// Called at the start of every episode.
    fn reset(&mut self) {}
}

/// Instantiates the planner named by `kind`.
pub fn make_planner(kind: PlannerKind) -> Box<dyn Planner> {
    match kind {
        PlannerKind::Cem => Box::new(crate::cem::CemPlanner::default()),
        PlannerKind::MctsRandom => Box::new(crate::mcts::MctsPlanner::random()),
        PlannerKind::MctsCem => Box::new(crate::mcts::MctsPlanner::cem()),
    }
}
