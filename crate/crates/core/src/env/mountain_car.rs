use rand::Rng;

use super::{EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{Action, ActionBounds, State};

pub const GOAL_X: f64 = 0.45;
pub const DEFAULT_STEP_PENALTY: f64 = -0.01;
const MIN_X: f64 = -1.2;
const MAX_X: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const POWER: f64 = 0.0015;

fn unpack(state: &State) -> Result<(f64, f64)> {
    state.check_finite()?;
    match state.as_slice() {
        [x, v] => Ok((*x, *v)),
        other => Err(Error::InvalidState(format!("mountain car state has {} entries, expected 2", other.len()))),
    }
}

fn force(action: &Action) -> Result<f64> {
    match action.as_slice() {
        [u] if u.is_finite() => Ok(u.clamp(-1.0, 1.0)),
        other => Err(Error::InvalidArgument(format!("mountain car action must be one finite force, got {other:?}"))),
    }
}

/// Sparse reward: `+1` on the goal (ending the episode), `step_penalty` elsewhere.
pub fn mountaincar_step(state: &State, action: &Action, step_penalty: f64) -> Result<StepResult> {
    let (x, v) = unpack(state)?;
    let u = force(action)?;
    let at_goal = x >= GOAL_X;
    let mut new_v = (v + POWER * u - 0.0025 * (3.0 * x).cos()).clamp(-MAX_SPEED, MAX_SPEED);
    let new_x = (x + new_v).clamp(MIN_X, MAX_X);
    if new_x == MIN_X && new_v < 0.0 {
        new_v = 0.0;
    }
    Ok(StepResult {
        next_state: State::new(vec![new_x, new_v]),
        reward: if at_goal { 1.0 } else { step_penalty },
        done: at_goal,
    })
}

#[derive(Debug, Clone)]
pub struct MountainCar {
    spec: EnvSpec,
    step_penalty: f64,
}

impl Default for MountainCar {
    fn default() -> Self {
        MountainCar {
            spec: EnvSpec {
                name: "sparse-mountain-car".into(),
                state_dim: 2,
                action_dim: 1,
                action_bounds: ActionBounds::symmetric(1, 1.0),
                max_episode_steps: 200,
            },
            step_penalty: DEFAULT_STEP_PENALTY,
        }
    }
}

impl MountainCar {
    pub fn with_step_penalty(mut self, penalty: f64) -> Result<Self> {
        if !penalty.is_finite() {
            return Err(Error::Config("step_penalty must be finite".into()));
        }
        self.step_penalty = penalty;
        Ok(self)
    }

    pub fn with_max_steps(mut self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("max_episode_steps must be at least 1".into()));
        }
        self.spec.max_episode_steps = steps;
        Ok(self)
    }

    pub fn step_penalty(&self) -> f64 {
        self.step_penalty
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut RngStream) -> State {
        State::new(vec![rng.gen_range(-0.6..=-0.4), 0.0])
    }

    fn step(&self, state: &State, action: &Action) -> Result<StepResult> {
        mountaincar_step(state, action, self.step_penalty)
    }

    fn reward(&self, state: &State, _action: &Action) -> f64 {
        if state.0[0] >= GOAL_X {
            1.0
        } else {
            self.step_penalty
        }
    }
}
