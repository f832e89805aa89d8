//! Probabilistic ensemble dynamics model.

mod buffer;
mod ensemble;
pub mod mlp;
mod normalize;

use rand::Rng;
use rand_distr::StandardNormal;

pub use buffer::ReplayBuffer;
pub use ensemble::{EnsembleModel, ModelConfig, TrainReport, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use normalize::{NormalizationStats, Standardizer, STD_EPSILON};

use crate::error::Result;
use crate::types::{Action, State};

/// One member's Gaussian over the next state, plus its reward estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberPrediction {
    pub mean: State,
    pub var: Vec<f64>,
    pub reward: f64,
}

/// All members' predictions for a single `(state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    dim: usize,
    means: Vec<f64>,
    vars: Vec<f64>,
    rewards: Vec<f64>,
}

impl EnsemblePrediction {
    pub fn new(members: Vec<MemberPrediction>) -> Self {
        let dim = members.first().map_or(0, |m| m.mean.dim());
        let mut p = EnsemblePrediction {
            dim,
            means: Vec::with_capacity(dim * members.len()),
            vars: Vec::with_capacity(dim * members.len()),
            rewards: Vec::with_capacity(members.len()),
        };
        for m in members {
            assert_eq!(m.mean.dim(), dim, "members disagree on state dimension");
            p.means.extend_from_slice(m.mean.as_slice());
            p.vars.extend_from_slice(&m.var);
            p.rewards.push(m.reward);
        }
        p
    }

    pub(crate) fn with_capacity(dim: usize, members: usize) -> Self {
        EnsemblePrediction {
            dim,
            means: Vec::with_capacity(dim * members),
            vars: Vec::with_capacity(dim * members),
            rewards: Vec::with_capacity(members),
        }
    }

    pub(crate) fn push(&mut self, mean: &[f64], var: &[f64], reward: f64) {
        self.means.extend_from_slice(mean);
        self.vars.extend_from_slice(var);
        self.rewards.push(reward);
    }

    pub fn members(&self) -> usize {
        self.rewards.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn member_mean(&self, m: usize) -> &[f64] {
        &self.means[m * self.dim..(m + 1) * self.dim]
    }

    pub fn member_var(&self, m: usize) -> &[f64] {
        &self.vars[m * self.dim..(m + 1) * self.dim]
    }

    pub fn member_reward(&self, m: usize) -> f64 {
        self.rewards[m]
    }

    /// Average of the member means: the ensemble-mean next state.
    pub fn mean_state(&self) -> State {
        let m = self.members() as f64;
        let mut out = vec![0.0; self.dim];
        for chunk in self.means.chunks_exact(self.dim) {
            for (o, x) in out.iter_mut().zip(chunk) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|o| *o /= m);
        State::new(out)
    }

    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().sum::<f64>() / self.members() as f64
    }

    /// `n` draws per member from standard-normal noise `z` (length
    /// `members * n * dim`), concatenated member by member.
    pub fn aggregate_samples_from_noise(&self, n: usize, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        assert_eq!(z.len(), self.members() * n * d, "noise table has the wrong size");
        let mut out = Vec::with_capacity(z.len());
        for m in 0..self.members() {
            let mean = self.member_mean(m);
            let sd: Vec<f64> = self.member_var(m).iter().map(|v| v.sqrt()).collect();
            for i in 0..n {
                let zi = &z[(m * n + i) * d..(m * n + i + 1) * d];
                out.extend(mean.iter().zip(&sd).zip(zi).map(|((mu, s), z)| mu + s * z));
            }
        }
        out
    }

    /// Draws `n` samples from each member's Gaussian, `members * n` points in
    /// total, flattened row-major.
    pub fn aggregate_samples<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.members() * n * self.dim).map(|_| rng.sample(StandardNormal)).collect();
        self.aggregate_samples_from_noise(n, &z)
    }

    /// One draw from a member chosen by `u in [0, 1)`, using noise `z`.
    pub fn sample_next_from_noise(&self, u: f64, z: &[f64]) -> State {
        let m = ((u * self.members() as f64) as usize).min(self.members() - 1);
        State::new(
            self.member_mean(m)
                .iter()
                .zip(self.member_var(m))
                .zip(z)
                .map(|((mu, v), z)| mu + v.sqrt() * z)
                .collect(),
        )
    }
}

/// Anything that can predict next-state Gaussians per ensemble member.
///
/// Implementations must be read-only: planning never mutates the model.
pub trait DynamicsModel: Sync {
    fn state_dim(&self) -> usize;

    fn n_members(&self) -> usize;

    fn predict(&self, state: &State, action: &Action) -> Result<EnsemblePrediction>;
}

/// `n` samples from every member's predictive Gaussian, concatenated.
pub fn predict_aggregate_samples<R: Rng + ?Sized>(
    model: &dyn DynamicsModel,
    state: &State,
    action: &Action,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(model.predict(state, action)?.aggregate_samples(n, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn pred(means: &[f64], var: f64) -> EnsemblePrediction {
        EnsemblePrediction::new(
            means
                .iter()
                .map(|&m| MemberPrediction { mean: State::new(vec![m]), var: vec![var], reward: m })
                .collect(),
        )
    }

    #[test]
    fn sample_count_is_members_times_n() {
        let p = pred(&[0.0, 1.0, 2.0], 1.0);
        assert_eq!(p.aggregate_samples(7, &mut stream(0, &[])).len(), 21);
    }

    #[test]
    fn degenerate_members_collapse() {
        let p = pred(&[0.5; 4], 1e-12);
        let s = p.aggregate_samples(50, &mut stream(1, &[]));
        assert!(s.iter().all(|x| (x - 0.5).abs() < 1e-4));
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let p = pred(&[-1.0, 0.0, 3.0], 1.0);
        let n = 2000;
        let s = p.aggregate_samples(n, &mut stream(2, &[]));
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        // each member contributes variance 1; mixing members at fixed counts adds none
        let tol = 3.0 / ((3 * n) as f64).sqrt();
        assert!((mean - 2.0 / 3.0).abs() < tol, "{mean}");
    }

    #[test]
    fn mean_state_and_reward() {
        let p = pred(&[1.0, 3.0], 1.0);
        assert_eq!(p.mean_state().0, vec![2.0]);
        assert_eq!(p.mean_reward(), 2.0);
    }
}
