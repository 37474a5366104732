//! Random small goal-conditioned MDPs and policies for property checks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::mdp::{Outcomes, TabularGoalMdp};
use crate::oracle::StochasticPolicy;
use crate::rng::SimRng;

/// Shape of a random instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    /// Regular states, excluding the absorbing one. The goal is the last.
    pub n_regular: usize,
    pub n_actions: usize,
    /// Maximum successors per `(s, a)`; 1 gives deterministic dynamics.
    pub max_successors: usize,
    pub gamma: f64,
}

/// Random MDP with a single goal (the last regular state). Action 0 always
/// keeps some mass on `s -> s + 1`, so the goal is reachable from every
/// state, and no regular state jumps straight to the absorbing state.
pub fn random_mdp(shape: InstanceShape, rng: &mut SimRng) -> Result<TabularGoalMdp> {
    let n = shape.n_regular;
    let goal = n - 1;
    let mut base: Vec<Outcomes> = Vec::with_capacity(n * shape.n_actions);
    for s in 0..n {
        for a in 0..shape.n_actions {
            let k = 1 + rng.below(shape.max_successors.max(1));
            let mut targets: Vec<usize> = (0..k).map(|_| rng.below(n)).collect();
            if a == 0 && s + 1 < n {
                targets[0] = s + 1;
            }
            let weights: Vec<f64> = (0..k).map(|_| 0.05 + rng.uniform()).collect();
            let total: f64 = weights.iter().sum();
            let mut row: Outcomes = targets
                .into_iter()
                .zip(weights.iter().map(|w| w / total))
                .collect();
            // renormalize away rounding so the row sums to one within 1e-12
            let drift: f64 = 1.0 - row.iter().map(|x| x.1).sum::<f64>();
            row[0].1 += drift;
            base.push(row);
        }
    }
    let mut rho0: Vec<f64> = (0..n)
        .map(|s| if s == goal { 0.0 } else { 0.05 + rng.uniform() })
        .collect();
    let total: f64 = rho0.iter().sum();
    rho0.iter_mut().for_each(|p| *p /= total);
    TabularGoalMdp::from_base_dynamics(
        n,
        shape.n_actions,
        &base,
        vec![goal],
        &rho0,
        vec![1.0],
        shape.gamma,
    )
}

/// Random policy with full support (every action has positive probability).
pub fn random_policy(mdp: &TabularGoalMdp, rng: &mut SimRng) -> Result<StochasticPolicy> {
    let na = mdp.n_actions();
    let mut probs = Vec::with_capacity(mdp.n_goals() * mdp.n_states() * na);
    for _ in 0..mdp.n_goals() * mdp.n_states() {
        let w: Vec<f64> = (0..na).map(|_| 0.05 + rng.uniform()).collect();
        let total: f64 = w.iter().sum();
        let mut row: Vec<f64> = w.iter().map(|x| x / total).collect();
        let drift = 1.0 - row.iter().sum::<f64>();
        row[0] += drift;
        probs.extend(row);
    }
    StochasticPolicy::new(mdp, probs)
}

/// Random deterministic policy.
pub fn random_deterministic_policy(
    mdp: &TabularGoalMdp,
    rng: &mut SimRng,
) -> Result<StochasticPolicy> {
    let actions: Vec<usize> = (0..mdp.n_goals() * mdp.n_states())
        .map(|_| rng.below(mdp.n_actions()))
        .collect();
    StochasticPolicy::deterministic(mdp, &actions)
}
