//! Benchmark environments with exact reward functions.
//!
//! Environments are stateless: `step` is a pure function of `(state, action)`
//! and the only mutable episode state (the step counter) lives in [`Episode`].

mod mountain_car;
mod pendulum;

use serde::{Deserialize, Serialize};

pub use mountain_car::{mountaincar_step, MountainCar, DEFAULT_STEP_PENALTY, GOAL_X};
pub use pendulum::{normalize_angle, pendulum_reward, pendulum_step, Pendulum, MAX_SPEED, MAX_TORQUE};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{Action, ActionBounds, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bounds: ActionBounds,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: State,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Samples an initial state.
    fn reset(&self, rng: &mut RngStream) -> State;

    /// Advances one step. `done` here only reports reaching a goal; the step
    /// limit is enforced by [`Episode`].
    fn step(&self, state: &State, action: &Action) -> Result<StepResult>;

    /// The exact reward `r(s, a)` that `step` would emit.
    fn reward(&self, state: &State, action: &Action) -> f64;
}

/// Builds an environment by its config name.
pub fn make_env(name: &str, overrides: &EnvOverrides) -> Result<Box<dyn Environment>> {
    match name {
        "pendulum" => {
            let mut env = Pendulum::default();
            if let Some(n) = overrides.max_episode_steps {
                env = env.with_max_steps(n)?;
            }
            Ok(Box::new(env))
        }
        "sparse-mountain-car" => {
            let mut env = MountainCar::default();
            if let Some(p) = overrides.step_penalty {
                env = env.with_step_penalty(p)?;
            }
            if let Some(n) = overrides.max_episode_steps {
                env = env.with_max_steps(n)?;
            }
            Ok(Box::new(env))
        }
        other => Err(Error::Config(format!(
            "unknown env {other:?} (expected \"pendulum\" or \"sparse-mountain-car\")"
        ))),
    }
}

/// Optional per-run environment settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvOverrides {
    pub step_penalty: Option<f64>,
    pub max_episode_steps: Option<usize>,
}

/// A running episode: current state plus the step counter.
pub struct Episode<'a> {
    env: &'a dyn Environment,
    state: State,
    steps: usize,
    done: bool,
}

impl<'a> Episode<'a> {
    pub fn start(env: &'a dyn Environment, rng: &mut RngStream) -> Self {
        let state = env.reset(rng);
        Episode { env, state, steps: 0, done: false }
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::InvalidOperation("episode already finished".into()));
        }
        let mut result = self.env.step(&self.state, action)?;
        self.steps += 1;
        if self.steps >= self.env.spec().max_episode_steps {
            result.done = true;
        }
        self.done = result.done;
        self.state = result.next_state.clone();
        Ok(result)
    }
}
