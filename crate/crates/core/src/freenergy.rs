//! Expected-free-energy scoring.
//!
//! The epistemic term is the ensemble's mutual information: the entropy of the
//! aggregated predictive mixture (Kozachenko–Leonenko k-NN estimate over
//! samples) minus the average closed-form entropy of the member Gaussians.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{DynamicsModel, EnsemblePrediction};
use crate::types::{Action, State};

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Smallest neighbour distance used in the k-NN estimate.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Differential entropy in nats of a diagonal Gaussian with variances `var`.
pub fn gaussian_entropy(var: &[f64]) -> Result<f64> {
    if var.is_empty() {
        return Err(Error::InvalidArgument("empty variance vector".into()));
    }
    if let Some(v) = var.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {v}")));
    }
    let log_two_pi_e = (2.0 * PI).ln() + 1.0;
    Ok(0.5 * var.iter().map(|v| log_two_pi_e + v.ln()).sum::<f64>())
}

/// `psi(n)` for positive integers.
pub fn digamma_int(n: usize) -> f64 {
    assert!(n > 0, "digamma is undefined at 0");
    -EULER_MASCHERONI + (1..n).map(|i| 1.0 / i as f64).sum::<f64>()
}

/// Log-volume of the Euclidean unit ball in `d` dimensions.
pub fn ln_unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2 pi / d
    let mut ln_v = if d % 2 == 0 { 0.0 } else { 2f64.ln() };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        ln_v += (2.0 * PI / k as f64).ln();
        k += 2;
    }
    ln_v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnEstimate {
    pub nats: f64,
    /// Points whose k-th neighbour distance hit [`DISTANCE_FLOOR`].
    pub floored: usize,
}

/// Kozachenko–Leonenko entropy estimate of `samples` (`N` rows of length `dim`).
///
/// `H = psi(N) - psi(k) + ln c_d + (d / N) sum ln eps_i` with `eps_i` twice the
/// Euclidean distance to the k-th neighbour. Because `eps_i` is a diameter,
/// `c_d` is the volume of the ball of unit diameter, `V_d / 2^d`.
pub fn knn_entropy_detailed(samples: &[f64], dim: usize, k: usize) -> Result<KnnEstimate> {
    if dim == 0 || samples.len() % dim != 0 {
        return Err(Error::InvalidArgument(format!("{} values do not form rows of {dim}", samples.len())));
    }
    let n = samples.len() / dim;
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!("need more than k = {k} samples, got {n}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    // k smallest squared distances per row, ascending; each pair is visited once
    let mut best = vec![f64::INFINITY; n * k];
    fn insert(row: &mut [f64], d2: f64) {
        let k = row.len();
        if d2 < row[k - 1] {
            let mut p = k - 1;
            while p > 0 && row[p - 1] > d2 {
                row[p] = row[p - 1];
                p -= 1;
            }
            row[p] = d2;
        }
    }
    for i in 0..n {
        let xi = &samples[i * dim..(i + 1) * dim];
        for j in i + 1..n {
            let xj = &samples[j * dim..(j + 1) * dim];
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            insert(&mut best[i * k..(i + 1) * k], d2);
            insert(&mut best[j * k..(j + 1) * k], d2);
        }
    }
    let mut sum_ln_eps = 0.0;
    let mut floored = 0;
    for row in best.chunks_exact(k) {
        let mut eps = 2.0 * row[k - 1].sqrt();
        if eps < DISTANCE_FLOOR {
            eps = DISTANCE_FLOOR;
            floored += 1;
        }
        sum_ln_eps += eps.ln();
    }
    let ln_c = ln_unit_ball_volume(dim) - dim as f64 * 2f64.ln();
    let nats = digamma_int(n) - digamma_int(k) + ln_c + dim as f64 * sum_ln_eps / n as f64;
    Ok(KnnEstimate { nats, floored })
}

pub fn knn_entropy(samples: &[f64], dim: usize, k: usize) -> Result<f64> {
    knn_entropy_detailed(samples, dim, k).map(|e| e.nats)
}

/// Settings for the epistemic-value estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpistemicParams {
    pub k: usize,
    pub samples_per_member: usize,
    pub clamp_at_zero: bool,
}

impl Default for EpistemicParams {
    fn default() -> Self {
        EpistemicParams { k: 3, samples_per_member: 20, clamp_at_zero: false }
    }
}

/// Both entropy terms of an epistemic-value estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpistemicBreakdown {
    pub aggregate_entropy: f64,
    pub mean_member_entropy: f64,
    pub value: f64,
}

/// Mixture entropy minus mean member entropy, sampling the mixture from the
/// standard-normal table `z` (`members * samples_per_member * dim` values).
pub fn epistemic_breakdown(pred: &EnsemblePrediction, params: &EpistemicParams, z: &[f64]) -> Result<EpistemicBreakdown> {
    if pred.members() < 2 {
        return Err(Error::InvalidArgument("epistemic value needs at least two members".into()));
    }
    let samples = pred.aggregate_samples_from_noise(params.samples_per_member, z);
    let aggregate_entropy = knn_entropy(&samples, pred.dim(), params.k)?;
    let mut member_sum = 0.0;
    for m in 0..pred.members() {
        member_sum += gaussian_entropy(pred.member_var(m))?;
    }
    let mean_member_entropy = member_sum / pred.members() as f64;
    let mut value = aggregate_entropy - mean_member_entropy;
    if params.clamp_at_zero {
        value = value.max(0.0);
    }
    Ok(EpistemicBreakdown { aggregate_entropy, mean_member_entropy, value })
}

/// Standard-normal noise table sized for one epistemic estimate.
pub fn epistemic_noise<R: Rng + ?Sized>(members: usize, dim: usize, params: &EpistemicParams, rng: &mut R) -> Vec<f64> {
    (0..members * params.samples_per_member * dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Information gain of taking `action` in `state`, in nats.
pub fn epistemic_value<R: Rng + ?Sized>(
    state: &State,
    action: &Action,
    model: &dyn DynamicsModel,
    params: &EpistemicParams,
    rng: &mut R,
) -> Result<f64> {
    let pred = model.predict(state, action)?;
    let z = epistemic_noise(pred.members(), pred.dim(), params, rng);
    epistemic_breakdown(&pred, params, &z).map(|b| b.value)
}

/// Score of one candidate plan. Lower `score` is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEvaluation {
    pub reward_sum: f64,
    pub ev_sum: f64,
    pub score: f64,
}

/// `score = sum(-r_t) - lambda * sum(EV_t)`: reward and information gain both
/// lower the free energy.
pub fn score_candidate(rewards: &[f64], evs: &[f64], lambda: f64) -> Result<CandidateEvaluation> {
    if rewards.len() != evs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rewards but {} epistemic values",
            rewards.len(),
            evs.len()
        )));
    }
    let reward_sum: f64 = rewards.iter().sum();
    let ev_sum: f64 = evs.iter().sum();
    let score = free_energy(reward_sum, ev_sum, lambda);
    if !score.is_finite() {
        return Err(Error::InvalidArgument("non-finite candidate score".into()));
    }
    Ok(CandidateEvaluation { reward_sum, ev_sum, score })
}

#[inline]
pub(crate) fn free_energy(reward_sum: f64, ev_sum: f64, lambda: f64) -> f64 {
    -reward_sum - lambda * ev_sum
}
