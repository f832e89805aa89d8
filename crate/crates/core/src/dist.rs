//! Diagonal Gaussian over `H`-step action sequences.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{Action, ActionBounds, ActionSequence};

/// Per-step mean and diagonal variance over an `H x d_a` action plan.
///
/// Variances never drop below `var_floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianActionDistribution {
    horizon: usize,
    dim: usize,
    mean: Vec<f64>,
    var: Vec<f64>,
    var_floor: f64,
}

impl GaussianActionDistribution {
    pub fn new(horizon: usize, dim: usize, mean: Vec<f64>, var: Vec<f64>, var_floor: f64) -> Result<Self> {
        if horizon == 0 || dim == 0 {
            return Err(Error::InvalidArgument("distribution shape must be positive".into()));
        }
        if mean.len() != horizon * dim || var.len() != horizon * dim {
            return Err(Error::InvalidArgument(format!(
                "mean/var lengths {}/{} do not match shape ({horizon}, {dim})",
                mean.len(),
                var.len()
            )));
        }
        if !(var_floor > 0.0 && var_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!("var_floor must be positive, got {var_floor}")));
        }
        if mean.iter().any(|m| !m.is_finite()) || var.iter().any(|v| !(v.is_finite() && *v >= var_floor)) {
            return Err(Error::InvalidArgument("mean must be finite and var >= var_floor".into()));
        }
        Ok(GaussianActionDistribution { horizon, dim, mean, var, var_floor })
    }

    /// `N(0, I)`, the initial CEM distribution.
    pub fn standard(horizon: usize, dim: usize, var_floor: f64) -> Result<Self> {
        let n = horizon * dim;
        GaussianActionDistribution::new(horizon, dim, vec![0.0; n], vec![1.0f64.max(var_floor); n], var_floor)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn step_mean(&self, t: usize) -> &[f64] {
        &self.mean[t * self.dim..(t + 1) * self.dim]
    }

    pub fn step_var(&self, t: usize) -> &[f64] {
        &self.var[t * self.dim..(t + 1) * self.dim]
    }

    /// Draws one full plan, clipping every entry to `bounds`.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, rng: &mut R, bounds: &ActionBounds) -> ActionSequence {
        let mut data: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.var)
            .map(|(m, v)| {
                let z: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * z
            })
            .collect();
        bounds.clip_in_place(&mut data);
        ActionSequence::from_flat(self.horizon, self.dim, data).expect("shape is fixed by the distribution")
    }

    /// Draws from the marginal of step `t` (clamped to the last step).
    pub fn sample_step<R: Rng + ?Sized>(&self, t: usize, rng: &mut R, bounds: &ActionBounds) -> Action {
        let t = t.min(self.horizon - 1);
        let mut values: Vec<f64> = self
            .step_mean(t)
            .iter()
            .zip(self.step_var(t))
            .map(|(m, v)| {
                let z: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * z
            })
            .collect();
        bounds.clip_in_place(&mut values);
        Action(values)
    }

    /// Refits mean and biased (1/k) diagonal variance to the elite candidates.
    pub fn refit(candidates: &[ActionSequence], elites: &[usize], var_floor: f64) -> Result<Self> {
        let first = match elites.first() {
            Some(&i) => candidates
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("elite index {i} out of range")))?,
            None => return Err(Error::InvalidArgument("empty elite set".into())),
        };
        let (horizon, dim) = (first.horizon(), first.dim());
        let n = horizon * dim;
        let mut mean = vec![0.0; n];
        for &i in elites {
            let c = candidates
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("elite index {i} out of range")))?;
            if c.horizon() != horizon || c.dim() != dim {
                return Err(Error::InvalidArgument("candidates differ in shape".into()));
            }
            for (m, x) in mean.iter_mut().zip(c.as_flat()) {
                *m += x;
            }
        }
        let k = elites.len() as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        let mut var = vec![0.0; n];
        for &i in elites {
            for ((v, x), m) in var.iter_mut().zip(candidates[i].as_flat()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|v| *v = (*v / k).max(var_floor));
        GaussianActionDistribution::new(horizon, dim, mean, var, var_floor)
    }

    /// Mean of the first step, clipped: the action executed under receding horizon.
    pub fn first_action(&self, bounds: &ActionBounds) -> Action {
        let mut values = self.step_mean(0).to_vec();
        bounds.clip_in_place(&mut values);
        Action(values)
    }

    /// Drops the first step and repeats the last one; variance resets to 1.
    pub fn shifted(&self) -> Self {
        let mut mean = self.mean[self.dim..].to_vec();
        mean.extend_from_slice(self.step_mean(self.horizon - 1));
        let var = vec![1.0f64.max(self.var_floor); self.horizon * self.dim];
        GaussianActionDistribution { mean, var, ..self.clone() }
    }
}
