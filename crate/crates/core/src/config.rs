use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where planners get `r(s, a)` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// The environment's exact reward function.
    Oracle,
    /// The ensemble's reward head.
    Learned,
}

/// How model rollouts advance the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    /// Average of the member means.
    Mean,
    /// One draw from a uniformly chosen member's Gaussian.
    Sample,
}

/// Hyperparameters shared by the CEM, MCTS-CEM and MCTS-Random planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub n_candidates: usize,
    pub k_elite: usize,
    pub cem_iters: usize,
    /// Weight of the epistemic term in the candidate score.
    pub lambda: f64,
    pub gamma: f64,
    pub n_sim: usize,
    pub n_children: usize,
    pub c_ucb: f64,
    pub rollout_horizon: usize,
    pub max_depth: usize,
    pub knn_k: usize,
    pub ensemble_m: usize,
    /// Draws per ensemble member when estimating the mixture entropy.
    pub ev_samples: usize,
    pub var_floor: f64,
    pub reward_mode: RewardMode,
    pub propagation: Propagation,
    /// Clamp negative epistemic estimates to zero.
    pub clamp_ev: bool,
    /// Start each CEM fit from the previous step's shifted mean instead of `N(0, I)`.
    pub warm_start: bool,
    /// Add `lambda * EV` to the per-step return inside tree rollouts.
    pub intrinsic_rollout: bool,
    /// Threads used for candidate evaluation.
    pub workers: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 12,
            n_candidates: 500,
            k_elite: 50,
            cem_iters: 5,
            lambda: 0.1,
            gamma: 0.99,
            n_sim: 50,
            n_children: 8,
            c_ucb: 1.0,
            rollout_horizon: 12,
            max_depth: 5,
            knn_k: 3,
            ensemble_m: 5,
            ev_samples: 20,
            var_floor: 1e-4,
            reward_mode: RewardMode::Oracle,
            propagation: Propagation::Mean,
            clamp_ev: false,
            warm_start: false,
            intrinsic_rollout: false,
            workers: 1,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("horizon", self.horizon),
            ("n_candidates", self.n_candidates),
            ("k_elite", self.k_elite),
            ("cem_iters", self.cem_iters),
            ("n_sim", self.n_sim),
            ("n_children", self.n_children),
            ("rollout_horizon", self.rollout_horizon),
            ("max_depth", self.max_depth),
            ("knn_k", self.knn_k),
            ("ensemble_m", self.ensemble_m),
            ("ev_samples", self.ev_samples),
            ("workers", self.workers),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.k_elite > self.n_candidates {
            return Err(Error::Config("k_elite must not exceed n_candidates".into()));
        }
        if self.knn_k >= self.ev_samples * self.ensemble_m {
            return Err(Error::Config("knn_k must be below ev_samples * ensemble_m".into()));
        }
        if self.rollout_horizon > self.horizon {
            return Err(Error::Config("rollout_horizon must not exceed horizon".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config("lambda must be a nonnegative real".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        if !(self.c_ucb >= 0.0 && self.c_ucb.is_finite()) {
            return Err(Error::Config("c_ucb must be a nonnegative real".into()));
        }
        if !(self.var_floor > 0.0 && self.var_floor.is_finite()) {
            return Err(Error::Config("var_floor must be positive".into()));
        }
        Ok(())
    }
}
