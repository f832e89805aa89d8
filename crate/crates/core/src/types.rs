//! Vectors exchanged between environments, models and planners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State(pub Vec<f64>);

impl State {
    pub fn new(values: Vec<f64>) -> Self {
        State(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState(format!("non-finite state {:?}", self.0)))
        }
    }
}

/// Control vector applied for one environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action(pub Vec<f64>);

impl Action {
    pub fn new(values: Vec<f64>) -> Self {
        Action(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Closed per-dimension intervals bounding an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl ActionBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.is_empty() || low.len() != high.len() {
            return Err(Error::InvalidArgument(format!(
                "bounds need matching nonempty low/high, got {} and {}",
                low.len(),
                high.len()
            )));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::InvalidArgument(format!(
                "empty or non-finite interval in {low:?}..{high:?}"
            )));
        }
        Ok(ActionBounds { low, high })
    }

    /// Same interval `[low, high]` on every dimension.
    pub fn symmetric(dim: usize, limit: f64) -> Self {
        ActionBounds::new(vec![-limit; dim], vec![limit; dim]).expect("valid symmetric bounds")
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub(crate) fn clip_in_place(&self, values: &mut [f64]) {
        for (i, v) in values.iter_mut().enumerate() {
            let d = i % self.low.len();
            *v = v.clamp(self.low[d], self.high[d]);
        }
    }
}

/// Projects every dimension of `action` onto its interval.
pub fn clip_action(action: &Action, bounds: &ActionBounds) -> Action {
    let mut values = action.0.clone();
    bounds.clip_in_place(&mut values);
    Action(values)
}

/// An `H`-step open-loop plan stored row-major as `H x d_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSequence {
    horizon: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ActionSequence {
    pub fn from_flat(horizon: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if horizon == 0 || dim == 0 || data.len() != horizon * dim {
            return Err(Error::InvalidArgument(format!(
                "sequence of {} values cannot have shape ({horizon}, {dim})",
                data.len()
            )));
        }
        Ok(ActionSequence { horizon, dim, data })
    }

    pub fn from_actions(actions: &[Action]) -> Result<Self> {
        let dim = actions.first().map_or(0, Action::dim);
        if actions.iter().any(|a| a.dim() != dim) {
            return Err(Error::InvalidArgument("ragged action sequence".into()));
        }
        let data = actions.iter().flat_map(|a| a.0.iter().copied()).collect();
        ActionSequence::from_flat(actions.len(), dim, data)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn action(&self, t: usize) -> Action {
        Action(self.step(t).to_vec())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// One environment interaction, as stored in the replay buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub next_state: State,
    pub reward: f64,
    pub done: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        let b = ActionBounds::symmetric(1, 2.0);
        assert_eq!(clip_action(&Action::new(vec![3.0]), &b).0, vec![2.0]);
        assert_eq!(clip_action(&Action::new(vec![0.5]), &b).0, vec![0.5]);
        assert_eq!(clip_action(&Action::new(vec![-7.0]), &b).0, vec![-2.0]);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(ActionBounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(ActionBounds::new(vec![], vec![]).is_err());
        assert!(ActionBounds::new(vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn sequence_shape_checked() {
        assert!(ActionSequence::from_flat(2, 2, vec![0.0; 3]).is_err());
        let s = ActionSequence::from_flat(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.step(1), &[3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn clip_is_idempotent_and_bounded(
            xs in prop::collection::vec(-1e6f64..1e6, 3),
            lo in -5.0f64..0.0,
            width in 0.0f64..5.0,
        ) {
            let b = ActionBounds::new(vec![lo; 3], vec![lo + width; 3]).unwrap();
            let once = clip_action(&Action::new(xs), &b);
            let twice = clip_action(&once, &b);
            prop_assert!(b.contains(&once.0));
            prop_assert_eq!(once, twice);
        }
    }
}
