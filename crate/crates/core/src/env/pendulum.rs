use std::f64::consts::PI;

use rand::Rng;

use super::{EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::types::{Action, ActionBounds, State};

pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;

/// Wraps an angle into `[-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land exactly on the open end after rounding
    wrapped.clamp(-PI, PI)
}

/// `-(theta^2 + 0.1 thdot^2 + 0.001 u^2)` with `theta` normalized, 0 upright.
pub fn pendulum_reward(theta: f64, theta_dot: f64, torque: f64) -> f64 {
    let th = normalize_angle(theta);
    -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque)
}

fn unpack(state: &State) -> Result<(f64, f64)> {
    state.check_finite()?;
    match state.as_slice() {
        [c, s, thdot] => Ok((s.atan2(*c), *thdot)),
        other => Err(Error::InvalidState(format!("pendulum state has {} entries, expected 3", other.len()))),
    }
}

fn torque(action: &Action) -> Result<f64> {
    match action.as_slice() {
        [u] if u.is_finite() => Ok(u.clamp(-MAX_TORQUE, MAX_TORQUE)),
        other => Err(Error::InvalidArgument(format!("pendulum action must be one finite torque, got {other:?}"))),
    }
}

/// One frictionless pendulum step on state `[cos th, sin th, thdot]`.
pub fn pendulum_step(state: &State, action: &Action) -> Result<StepResult> {
    let (theta, theta_dot) = unpack(state)?;
    let u = torque(action)?;
    let reward = pendulum_reward(theta, theta_dot, u);
    let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
    let new_dot = (theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let new_theta = theta + new_dot * DT;
    Ok(StepResult {
        next_state: State::new(vec![new_theta.cos(), new_theta.sin(), new_dot]),
        reward,
        done: false,
    })
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum {
            spec: EnvSpec {
                name: "pendulum".into(),
                state_dim: 3,
                action_dim: 1,
                action_bounds: ActionBounds::symmetric(1, MAX_TORQUE),
                max_episode_steps: 200,
            },
        }
    }
}

impl Pendulum {
    pub fn with_max_steps(mut self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("max_episode_steps must be at least 1".into()));
        }
        self.spec.max_episode_steps = steps;
        Ok(self)
    }

    pub fn state_from_angle(theta: f64, theta_dot: f64) -> State {
        State::new(vec![theta.cos(), theta.sin(), theta_dot])
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut RngStream) -> State {
        let theta = rng.gen_range(-PI..=PI);
        let theta_dot = rng.gen_range(-1.0..=1.0);
        Pendulum::state_from_angle(theta, theta_dot)
    }

    fn step(&self, state: &State, action: &Action) -> Result<StepResult> {
        pendulum_step(state, action)
    }

    fn reward(&self, state: &State, action: &Action) -> f64 {
        let theta = state.0[1].atan2(state.0[0]);
        let u = action.0[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        pendulum_reward(theta, state.0[2], u)
    }
}
