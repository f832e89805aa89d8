use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{self, Adam, Mlp, MlpShape, Target, Workspace, LOGVAR_MAX, LOGVAR_MIN};
use super::{DynamicsModel, EnsemblePrediction, MemberPrediction, NormalizationStats, ReplayBuffer, Standardizer};
use crate::error::{Error, Result};
use crate::rng::{stream, RngStream};
use crate::types::{Action, State};

pub const CHECKPOINT_FORMAT: &str = "freeplan-ensemble";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub members: usize,
    pub hidden: usize,
    pub var_floor: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { members: 5, hidden: 64, var_floor: 1e-4, learning_rate: 1e-3, batch_size: 32 }
    }
}

/// Mean training loss per epoch, one trace per member.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub member_losses: Vec<Vec<f64>>,
}

impl TrainReport {
    /// Last-epoch loss averaged over members, if any epoch ran.
    pub fn final_loss(&self) -> Option<f64> {
        let last: Vec<f64> = self.member_losses.iter().filter_map(|t| t.last().copied()).collect();
        (!last.is_empty()).then(|| last.iter().sum::<f64>() / last.len() as f64)
    }
}

/// Bootstrapped ensemble of Gaussian regressors over next-state deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    state_dim: usize,
    action_dim: usize,
    config: ModelConfig,
    members: Vec<Mlp>,
    stats: Option<NormalizationStats>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: EnsembleModel,
}

impl EnsembleModel {
    pub fn new(state_dim: usize, action_dim: usize, config: ModelConfig, seed: u64) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        if config.members == 0 || config.hidden == 0 || config.batch_size == 0 {
            return Err(Error::InvalidArgument("members, hidden and batch_size must be positive".into()));
        }
        if !(config.var_floor > 0.0) || !(config.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("var_floor and learning_rate must be positive".into()));
        }
        let shape = MlpShape { inputs: state_dim + action_dim, hidden: config.hidden, targets: state_dim };
        let members = (0..config.members)
            .map(|m| Mlp::init(shape, &mut stream(seed, &[m as u64])))
            .collect();
        Ok(EnsembleModel { state_dim, action_dim, config, members, stats: None })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn is_trained(&self) -> bool {
        self.stats.is_some()
    }

    pub fn stats(&self) -> Option<&NormalizationStats> {
        self.stats.as_ref()
    }

    pub fn member(&self, m: usize) -> Option<&Mlp> {
        self.members.get(m)
    }

    fn check_inputs(&self, state: &State, action: &Action) -> Result<&NormalizationStats> {
        let stats = self.stats.as_ref().ok_or(Error::UninitializedModel)?;
        if state.dim() != self.state_dim || action.dim() != self.action_dim {
            return Err(Error::InvalidArgument(format!(
                "expected state/action dims {}/{}, got {}/{}",
                self.state_dim,
                self.action_dim,
                state.dim(),
                action.dim()
            )));
        }
        state.check_finite()?;
        if action.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite action".into()));
        }
        Ok(stats)
    }

    fn normalized_input(&self, stats: &NormalizationStats, state: &State, action: &Action) -> Vec<f64> {
        let mut raw = Vec::with_capacity(self.state_dim + self.action_dim);
        raw.extend_from_slice(state.as_slice());
        raw.extend_from_slice(action.as_slice());
        stats.input.normalize(&raw)
    }

    /// Writes member `m`'s denormalized prediction into the output slices.
    fn decode(&self, stats: &NormalizationStats, state: &State, out: &[f64], mean: &mut [f64], var: &mut [f64]) -> f64 {
        let d = self.state_dim;
        for j in 0..d {
            let sd = stats.delta.std[j];
            mean[j] = state.0[j] + out[j] * sd + stats.delta.mean[j];
            let lv = out[d + j].clamp(LOGVAR_MIN, LOGVAR_MAX);
            var[j] = (lv.exp() * sd * sd).max(self.config.var_floor);
        }
        out[2 * d] * stats.reward.std[0] + stats.reward.mean[0]
    }

    /// Member `m`'s Gaussian over the next state (delta added back to `state`).
    pub fn predict_member(&self, m: usize, state: &State, action: &Action) -> Result<MemberPrediction> {
        let stats = self.check_inputs(state, action)?;
        let net = self
            .members
            .get(m)
            .ok_or_else(|| Error::InvalidArgument(format!("member {m} out of range")))?;
        let x = self.normalized_input(stats, state, action);
        let mut ws = Workspace::new(net.shape());
        net.forward(&x, &mut ws);
        let mut mean = vec![0.0; self.state_dim];
        let mut var = vec![0.0; self.state_dim];
        let reward = self.decode(stats, state, ws.output(), &mut mean, &mut var);
        Ok(MemberPrediction { mean: State::new(mean), var, reward })
    }

    /// Learned reward: member reward heads averaged.
    pub fn predict_reward(&self, state: &State, action: &Action) -> Result<f64> {
        Ok(self.predict(state, action)?.mean_reward())
    }

    /// Fits every member on its own bootstrap resample of `buffer`.
    ///
    /// Normalization statistics are refit from the full buffer first. With
    /// `epochs == 0` the model is left untouched.
    pub fn train(&mut self, buffer: &ReplayBuffer, epochs: usize, rng: &mut RngStream) -> Result<TrainReport> {
        if buffer.is_empty() {
            return Err(Error::InvalidArgument("cannot train on an empty buffer".into()));
        }
        if epochs == 0 {
            return Ok(TrainReport { member_losses: vec![Vec::new(); self.members.len()] });
        }
        let (ds, da) = (self.state_dim, self.action_dim);
        for t in buffer.iter() {
            if t.state.dim() != ds || t.next_state.dim() != ds || t.action.dim() != da {
                return Err(Error::InvalidArgument("transition dimensions do not match the model".into()));
            }
        }
        let inputs: Vec<Vec<f64>> = buffer
            .iter()
            .map(|t| t.state.0.iter().chain(&t.action.0).copied().collect())
            .collect();
        let deltas: Vec<Vec<f64>> = buffer
            .iter()
            .map(|t| t.next_state.0.iter().zip(&t.state.0).map(|(n, s)| n - s).collect())
            .collect();
        let rewards: Vec<[f64; 1]> = buffer.iter().map(|t| [t.reward]).collect();
        let stats = NormalizationStats {
            input: Standardizer::fit(ds + da, inputs.iter().map(|r| r.as_slice())),
            delta: Standardizer::fit(ds, deltas.iter().map(|r| r.as_slice())),
            reward: Standardizer::fit(1, rewards.iter().map(|r| r.as_slice())),
        };
        let x: Vec<Vec<f64>> = inputs.iter().map(|r| stats.input.normalize(r)).collect();
        let y: Vec<Vec<f64>> = deltas.iter().map(|r| stats.delta.normalize(r)).collect();
        let r: Vec<f64> = rewards.iter().map(|r| stats.reward.normalize(r)[0]).collect();

        let member_seeds: Vec<u64> = (0..self.members.len()).map(|_| rng.gen()).collect();
        let n = buffer.len();
        let batch_size = self.config.batch_size.min(n);
        let lr = self.config.learning_rate;
        let mut member_losses = Vec::with_capacity(self.members.len());
        for (m, net) in self.members.iter_mut().enumerate() {
            let mut mrng = stream(member_seeds[m], &[m as u64]);
            let mut order: Vec<usize> = (0..n).map(|_| mrng.gen_range(0..n)).collect();
            let shape = net.shape();
            let mut ws = Workspace::new(shape);
            let mut grad = vec![0.0; shape.n_params()];
            let mut opt = Adam::new(shape.n_params(), lr);
            let mut trace = Vec::with_capacity(epochs);
            for _ in 0..epochs {
                order.shuffle(&mut mrng);
                let mut epoch_loss = 0.0;
                let mut batches = 0usize;
                for chunk in order.chunks(batch_size) {
                    let xb: Vec<&[f64]> = chunk.iter().map(|&i| x[i].as_slice()).collect();
                    let tb: Vec<Target<'_>> = chunk.iter().map(|&i| Target { delta: &y[i], reward: r[i] }).collect();
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    epoch_loss += net.loss_and_grad(&xb, &tb, &mut grad, &mut ws);
                    batches += 1;
                    opt.step(net.params_mut(), &grad);
                }
                trace.push(epoch_loss / batches as f64);
            }
            member_losses.push(trace);
        }
        self.stats = Some(stats);
        Ok(TrainReport { member_losses })
    }

    /// Mean loss of every member on `buffer` under the current statistics.
    pub fn evaluate_loss(&self, buffer: &ReplayBuffer) -> Result<f64> {
        let stats = self.stats.as_ref().ok_or(Error::UninitializedModel)?;
        if buffer.is_empty() {
            return Err(Error::InvalidArgument("empty buffer".into()));
        }
        let x: Vec<Vec<f64>> = buffer.iter().map(|t| self.normalized_input(stats, &t.state, &t.action)).collect();
        let y: Vec<Vec<f64>> = buffer
            .iter()
            .map(|t| {
                let d: Vec<f64> = t.next_state.0.iter().zip(&t.state.0).map(|(n, s)| n - s).collect();
                stats.delta.normalize(&d)
            })
            .collect();
        let r: Vec<f64> = buffer.iter().map(|t| stats.reward.normalize(&[t.reward])[0]).collect();
        let xb: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let tb: Vec<Target<'_>> = y.iter().zip(&r).map(|(d, &r)| Target { delta: d, reward: r }).collect();
        let total: f64 = self
            .members
            .iter()
            .map(|net| {
                let mut ws = Workspace::new(net.shape());
                mlp::loss_with(net.params(), net.shape(), &xb, &tb, &mut ws)
            })
            .sum();
        Ok(total / self.members.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        let ckpt = Checkpoint { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, model: self.clone() };
        serde_json::to_string(&ckpt).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{} (want {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                ckpt.format, ckpt.version
            )));
        }
        let m = ckpt.model;
        let shape = MlpShape { inputs: m.state_dim + m.action_dim, hidden: m.config.hidden, targets: m.state_dim };
        if m.members.len() != m.config.members
            || m.members.iter().any(|net| net.shape() != shape || net.params().len() != shape.n_params())
        {
            return Err(Error::Format("checkpoint members do not match their declared shape".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EnsembleModel::from_json(&text)
    }
}

impl DynamicsModel for EnsembleModel {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn n_members(&self) -> usize {
        self.members.len()
    }

    fn predict(&self, state: &State, action: &Action) -> Result<EnsemblePrediction> {
        let stats = self.check_inputs(state, action)?;
        let x = self.normalized_input(stats, state, action);
        let mut ws = Workspace::new(self.members[0].shape());
        let mut pred = EnsemblePrediction::with_capacity(self.state_dim, self.members.len());
        let mut mean = vec![0.0; self.state_dim];
        let mut var = vec![0.0; self.state_dim];
        for net in &self.members {
            net.forward(&x, &mut ws);
            let reward = self.decode(stats, state, ws.output(), &mut mean, &mut var);
            pred.push(&mean, &var, reward);
        }
        Ok(pred)
    }
}
