#![allow(dead_code)]

use freeplan_core::model::{DynamicsModel, EnsemblePrediction, MemberPrediction};
use freeplan_core::{Action, PlannerConfig, Result, RewardMode, State};

/// Deterministic `s' = s + gain * a` with a state-dependent reward head.
pub struct LinearModel<F: Fn(&State, &Action) -> f64 + Sync> {
    pub dim: usize,
    pub gain: f64,
    pub members: usize,
    pub reward: F,
}

impl<F: Fn(&State, &Action) -> f64 + Sync> DynamicsModel for LinearModel<F> {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn n_members(&self) -> usize {
        self.members
    }

    fn predict(&self, state: &State, action: &Action) -> Result<EnsemblePrediction> {
        let a = action.as_slice();
        let mean = State::new(state.as_slice().iter().enumerate().map(|(i, s)| s + self.gain * a[i % a.len()]).collect());
        let r = (self.reward)(state, action);
        Ok(EnsemblePrediction::new(
            (0..self.members).map(|_| MemberPrediction { mean: mean.clone(), var: vec![1e-4; self.dim], reward: r }).collect(),
        ))
    }
}

/// Root state is `[0, 0]`; acting from it moves to `[1, a]`, every other state
/// is absorbing. The reward head pays `payoff(a)` per step spent at `[1, a]`.
pub struct AbsorbingModel<F: Fn(f64) -> f64 + Sync> {
    pub payoff: F,
}

impl<F: Fn(f64) -> f64 + Sync> DynamicsModel for AbsorbingModel<F> {
    fn state_dim(&self) -> usize {
        2
    }

    fn n_members(&self) -> usize {
        2
    }

    fn predict(&self, state: &State, action: &Action) -> Result<EnsemblePrediction> {
        let s = state.as_slice();
        let next = if s[0] == 0.0 { State::new(vec![1.0, action.as_slice()[0]]) } else { state.clone() };
        let reward = if s[0] == 1.0 { (self.payoff)(s[1]) } else { 0.0 };
        Ok(EnsemblePrediction::new(
            (0..2).map(|_| MemberPrediction { mean: next.clone(), var: vec![1e-4; 2], reward }).collect(),
        ))
    }
}

/// Planner settings for tests that inject the reward through the model.
pub fn learned_config() -> PlannerConfig {
    PlannerConfig { reward_mode: RewardMode::Learned, lambda: 0.0, ..PlannerConfig::default() }
}
