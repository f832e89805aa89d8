//! Model-based planning with expected free energy.
//!
//! The crate provides three receding-horizon planners over a learned
//! probabilistic ensemble:
//!
//! * [`cem`]: the Cross-Entropy Method over `H`-step action sequences,
//! * [`mcts`] with [`mcts::MctsVariant::Cem`]: tree search whose expansions and
//!   rollouts all sample one root distribution fitted by CEM,
//! * [`mcts`] with [`mcts::MctsVariant::Random`]: tree search with uniform
//!   random actions.
//!
//! Candidates are scored by a free-energy objective ([`freenergy`]) that
//! combines extrinsic reward with the ensemble's information gain. The
//! [`harness`] reproduces multi-trial benchmark runs on the environments in
//! [`env`].

pub mod cem;
pub mod config;
pub mod dist;
pub mod env;
pub mod error;
pub mod freenergy;
pub mod harness;
pub mod mcts;
pub mod model;
pub mod plan;
pub mod rng;
pub mod types;

pub use config::{PlannerConfig, Propagation, RewardMode};
pub use dist::GaussianActionDistribution;
pub use env::{EnvSpec, Environment, StepResult};
pub use error::{Error, Result};
pub use freenergy::CandidateEvaluation;
pub use model::{DynamicsModel, EnsembleModel, ReplayBuffer};
pub use plan::{PlanContext, Planner, PlannerKind, RewardSource};
pub use rng::{RngStream, StreamKey};
pub use types::{clip_action, Action, ActionBounds, ActionSequence, State, Transition};
