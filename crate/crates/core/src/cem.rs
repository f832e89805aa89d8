//! Cross-Entropy Method over action sequences.
//!
//! Used on its own as the CEM baseline and to fit the root action distribution
//! of MCTS-CEM.

use rand::Rng;

use crate::dist::GaussianActionDistribution;
use crate::error::{Error, Result};
use crate::freenergy::{free_energy, CandidateEvaluation};
use crate::plan::{PlanContext, Planner, StepNoise};
use crate::rng::{stream, RngStream};
use crate::types::{Action, ActionBounds, ActionSequence, State};

/// Sample/select/refit budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CemSettings {
    pub n_candidates: usize,
    pub k_elite: usize,
    pub iters: usize,
    pub var_floor: f64,
}

#[derive(Debug, Clone)]
pub struct CemFit {
    pub dist: GaussianActionDistribution,
    /// Lowest elite score after each iteration.
    pub best_scores: Vec<f64>,
}

/// Indices of the `k` lowest scores, ties broken by index.
pub fn select_elites(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

/// Minimizes `objective` over plans drawn from an evolving Gaussian.
///
/// The objective receives the candidates and a per-iteration seed and returns
/// one score per candidate (lower is better). From the second iteration on the
/// previous elites are re-scored alongside the fresh samples.
pub fn cem_optimize<F>(
    init: GaussianActionDistribution,
    settings: &CemSettings,
    bounds: &ActionBounds,
    rng: &mut RngStream,
    mut objective: F,
) -> Result<CemFit>
where
    F: FnMut(&[ActionSequence], u64) -> Result<Vec<f64>>,
{
    if settings.k_elite == 0 || settings.k_elite > settings.n_candidates {
        return Err(Error::InvalidArgument("need 1 <= k_elite <= n_candidates".into()));
    }
    let mut dist = init;
    let mut elites: Vec<ActionSequence> = Vec::new();
    let mut best_scores = Vec::with_capacity(settings.iters);
    for _ in 0..settings.iters {
        let mut candidates: Vec<ActionSequence> =
            (0..settings.n_candidates).map(|_| dist.sample_sequence(rng, bounds)).collect();
        candidates.append(&mut elites);
        let seed = rng.gen::<u64>();
        let scores = objective(&candidates, seed)?;
        if scores.len() != candidates.len() {
            return Err(Error::InvalidArgument("objective returned the wrong number of scores".into()));
        }
        let chosen = select_elites(&scores, settings.k_elite);
        best_scores.push(scores[chosen[0]]);
        dist = GaussianActionDistribution::refit(&candidates, &chosen, settings.var_floor)?;
        elites = chosen.iter().map(|&i| candidates[i].clone()).collect();
    }
    Ok(CemFit { dist, best_scores })
}

fn evaluate_one(s0: &State, candidate: &ActionSequence, ctx: &PlanContext<'_>, noise: &[StepNoise]) -> Result<CandidateEvaluation> {
    let mut state = s0.clone();
    let mut reward_sum = 0.0;
    let mut ev_sum = 0.0;
    for (t, step_noise) in noise.iter().enumerate().take(candidate.horizon()) {
        let step = ctx.step(&state, &candidate.action(t), step_noise)?;
        reward_sum += step.reward;
        ev_sum += step.ev.unwrap_or(0.0);
        state = step.next;
    }
    Ok(CandidateEvaluation { reward_sum, ev_sum, score: free_energy(reward_sum, ev_sum, ctx.cfg.lambda) })
}

/// Rolls every candidate through the model from `s0` and scores it.
///
/// All candidates share the per-step noise derived from `seed`, so the result
/// for a candidate does not depend on its position or on the worker count.
/// The epistemic term is only estimated when `lambda > 0`.
pub fn evaluate_candidates(
    s0: &State,
    candidates: &[ActionSequence],
    ctx: &PlanContext<'_>,
    seed: u64,
) -> Result<Vec<CandidateEvaluation>> {
    let horizon = candidates.iter().map(ActionSequence::horizon).max().unwrap_or(0);
    let with_ev = ctx.cfg.lambda > 0.0;
    let noise: Vec<StepNoise> = (0..horizon)
        .map(|t| StepNoise::draw(ctx, with_ev, &mut stream(seed, &[t as u64])))
        .collect();
    let workers = ctx.cfg.workers.max(1).min(candidates.len().max(1));
    if workers == 1 {
        return candidates.iter().map(|c| evaluate_one(s0, c, ctx, &noise)).collect();
    }
    let chunk = candidates.len().div_ceil(workers);
    let noise = &noise;
    std::thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|c| evaluate_one(s0, c, ctx, noise)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(candidates.len());
        for h in handles {
            out.extend(h.join().expect("evaluation worker panicked")?);
        }
        Ok(out)
    })
}

fn settings(ctx: &PlanContext<'_>) -> CemSettings {
    CemSettings {
        n_candidates: ctx.cfg.n_candidates,
        k_elite: ctx.cfg.k_elite,
        iters: ctx.cfg.cem_iters,
        var_floor: ctx.cfg.var_floor,
    }
}

/// Fits the root action distribution at `s0`, starting from `init` or `N(0, I)`.
pub fn fit_root_distribution(
    s0: &State,
    ctx: &PlanContext<'_>,
    rng: &mut RngStream,
    init: Option<GaussianActionDistribution>,
) -> Result<CemFit> {
    let init = match init {
        Some(d) => d,
        None => GaussianActionDistribution::standard(ctx.cfg.horizon, ctx.bounds.dim(), ctx.cfg.var_floor)?,
    };
    cem_optimize(init, &settings(ctx), ctx.bounds, rng, |cands, seed| {
        Ok(evaluate_candidates(s0, cands, ctx, seed)?.into_iter().map(|e| e.score).collect())
    })
}

/// First step of the fitted mean, clipped to bounds.
pub fn cem_plan(s0: &State, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<Action> {
    Ok(fit_root_distribution(s0, ctx, rng, None)?.dist.first_action(ctx.bounds))
}

/// Receding-horizon CEM controller.
#[derive(Debug, Default)]
pub struct CemPlanner {
    previous: Option<GaussianActionDistribution>,
}

impl Planner for CemPlanner {
    fn plan(&mut self, state: &State, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<Action> {
        let init = if ctx.cfg.warm_start { self.previous.as_ref().map(|d| d.shifted()) } else { None };
        let fit = fit_root_distribution(state, ctx, rng, init)?;
        let action = fit.dist.first_action(ctx.bounds);
        self.previous = Some(fit.dist);
        Ok(action)
    }

    fn reset(&mut self) {
        self.previous = None;
    }
}
