use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use freeplan_core::cem::cem_plan;
use freeplan_core::env::{make_env, EnvOverrides, Environment, Episode};
use freeplan_core::freenergy::knn_entropy;
use freeplan_core::mcts::{mcts_plan, MctsVariant};
use freeplan_core::model::{EnsembleModel, ModelConfig, ReplayBuffer};
use freeplan_core::plan::PlanContext;
use freeplan_core::rng::stream;
use freeplan_core::{Action, DynamicsModel, PlannerConfig, State, Transition};
use rand::Rng;
use rand_distr::StandardNormal;

fn trained_pendulum() -> (Box<dyn Environment>, EnsembleModel) {
    let env = make_env("pendulum", &EnvOverrides::default()).unwrap();
    let mut rng = stream(0, &[]);
    let mut buffer = ReplayBuffer::new(1000).unwrap();
    let mut ep = Episode::start(env.as_ref(), &mut rng);
    while !ep.is_done() {
        let state = ep.state().clone();
        let action = Action::new(vec![rng.gen_range(-2.0..=2.0)]);
        let r = ep.step(&action).unwrap();
        buffer.push(Transition { state, action, next_state: r.next_state, reward: r.reward, done: r.done });
    }
    let mut model = EnsembleModel::new(3, 1, ModelConfig::default(), 1).unwrap();
    model.train(&buffer, 5, &mut rng).unwrap();
    (env, model)
}

fn planner_config() -> PlannerConfig {
    PlannerConfig { horizon: 10, n_candidates: 50, k_elite: 8, cem_iters: 3, ev_samples: 8, n_sim: 30, n_children: 4, max_depth: 3, rollout_horizon: 10, ..PlannerConfig::default() }
}

fn entropy(c: &mut Criterion) {
    let mut rng = stream(2, &[]);
    let samples: Vec<f64> = (0..100 * 3).map(|_| rng.sample(StandardNormal)).collect();
    c.bench_function("knn_entropy 100x3", |b| b.iter(|| knn_entropy(black_box(&samples), 3, 3).unwrap()));
}

fn model(c: &mut Criterion) {
    let (_, model) = trained_pendulum();
    let s = State::new(vec![1.0, 0.0, 0.5]);
    let a = Action::new(vec![0.3]);
    c.bench_function("ensemble predict (5 x 64)", |b| b.iter(|| model.predict(black_box(&s), black_box(&a)).unwrap()));
}

fn planners(c: &mut Criterion) {
    let (env, model) = trained_pendulum();
    let cfg = planner_config();
    let ctx = PlanContext::for_env(&model, env.as_ref(), &cfg);
    let s = State::new(vec![-1.0, 0.0, 0.0]);
    let mut group = c.benchmark_group("plan one step");
    group.sample_size(10);
    group.bench_function("cem", |b| b.iter(|| cem_plan(&s, &ctx, &mut stream(3, &[])).unwrap()));
    group.bench_function("mcts-cem", |b| b.iter(|| mcts_plan(&s, &ctx, &mut stream(3, &[]), MctsVariant::Cem).unwrap()));
    group.bench_function("mcts-random", |b| b.iter(|| mcts_plan(&s, &ctx, &mut stream(3, &[]), MctsVariant::Random).unwrap()));
    group.finish();
}

criterion_group!(benches, entropy, model, planners);
criterion_main!(benches);
