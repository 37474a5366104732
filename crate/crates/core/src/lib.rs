//! Core of the AIM laboratory: tabular goal-conditioned MDPs, exact oracles for
//! the time-step quasimetric and the Wasserstein-1 distance it induces, a
//! learnable Kantorovich potential with a transition-based Lipschitz penalty,
//! a soft Q-learning agent, hindsight replay, and the training loop tying them
//! together.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration,
//! and the command-line front end live in the `aimlab` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod error;
pub mod instances;
mod linalg;
pub mod mdp;
pub mod oracle;
pub mod potential;
pub mod replay;
pub mod rng;
pub mod trainer;

pub use agent::SoftQTable;
pub use error::{Error, Result};
pub use mdp::{GridSpec, TabularGoalMdp, TransitionRecord};
pub use oracle::{OracleReport, StochasticPolicy};
pub use potential::{PotentialTable, RewardMode, RewardSpec};
pub use replay::{HerStrategy, ReplayBuffer};
pub use rng::SimRng;
pub use trainer::{Baseline, EpochMetrics, EvalMetrics, TrainConfig};
