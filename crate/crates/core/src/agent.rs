//! Tabular soft Q-learning: log-sum-exp backups and a Boltzmann policy at the
//! same temperature.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::mdp::{TabularGoalMdp, TransitionRecord};
use crate::oracle::StochasticPolicy;
use crate::rng::SimRng;

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_LR: f64 = 0.5;

/// `alpha * log sum_a exp(q_a / alpha)`, shifted by the row max.
pub fn soft_value(q_row: &[f64], alpha: f64) -> f64 {
    let m = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = q_row.iter().map(|q| libm::exp((q - m) / alpha)).sum();
    m + alpha * libm::log(sum)
}

/// `softmax(q / alpha)` written into `out`.
pub fn boltzmann(q_row: &[f64], alpha: f64, out: &mut [f64]) {
    let m = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, q) in out.iter_mut().zip(q_row) {
        *o = libm::exp((q - m) / alpha);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Soft Q-table `Q(s, a, g)` over goal slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftQTable {
    n_states: usize,
    n_actions: usize,
    n_goals: usize,
    q: Vec<f64>,
    alpha: f64,
    gamma: f64,
    lr: f64,
}

impl SoftQTable {
    /// Zero-initialized table shaped for `mdp`, discounting with its gamma.
    pub fn new(mdp: &TabularGoalMdp, alpha: f64, lr: f64) -> Result<Self> {
        Self::with_shape(
            mdp.n_states(),
            mdp.n_actions(),
            mdp.n_goals(),
            alpha,
            mdp.gamma(),
            lr,
        )
    }

    pub fn with_shape(
        n_states: usize,
        n_actions: usize,
        n_goals: usize,
        alpha: f64,
        gamma: f64,
        lr: f64,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} must be positive"
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma {gamma} outside [0, 1)"
            )));
        }
        if !(lr > 0.0 && lr <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {lr} outside (0, 1]"
            )));
        }
        Ok(SoftQTable {
            n_states,
            n_actions,
            n_goals,
            q: vec![0.0; n_states * n_actions * n_goals],
            alpha,
            gamma,
            lr,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    fn offset(&self, s: usize, slot: usize) -> usize {
        (slot * self.n_states + s) * self.n_actions
    }

    /// Action values at `(s, goal slot)`.
    pub fn row(&self, s: usize, slot: usize) -> &[f64] {
        let o = self.offset(s, slot);
        &self.q[o..o + self.n_actions]
    }

    pub fn row_mut(&mut self, s: usize, slot: usize) -> &mut [f64] {
        let o = self.offset(s, slot);
        &mut self.q[o..o + self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn soft_value_at(&self, s: usize, slot: usize) -> f64 {
        soft_value(self.row(s, slot), self.alpha)
    }

    /// Boltzmann action distribution at `(s, g)`, `g` a goal state.
    pub fn policy_from_q(&self, mdp: &TabularGoalMdp, s: usize, goal: usize) -> Result<Vec<f64>> {
        check_index("state", s, self.n_states)?;
        let slot = mdp.require_goal_slot(goal)?;
        let mut out = vec![0.0; self.n_actions];
        boltzmann(self.row(s, slot), self.alpha, &mut out);
        Ok(out)
    }

    /// Sample from the Boltzmann policy; `slot` is a goal slot.
    pub fn sample_action(&self, s: usize, slot: usize, rng: &mut SimRng) -> usize {
        let mut probs = vec![0.0; self.n_actions];
        boltzmann(self.row(s, slot), self.alpha, &mut probs);
        rng.categorical(&probs)
    }

    /// The full Boltzmann policy as a table, for oracles and evaluation.
    pub fn to_policy(&self, mdp: &TabularGoalMdp) -> Result<StochasticPolicy> {
        let mut probs = vec![0.0; self.q.len()];
        for (qrow, prow) in self
            .q
            .chunks(self.n_actions)
            .zip(probs.chunks_mut(self.n_actions))
        {
            boltzmann(qrow, self.alpha, prow);
        }
        StochasticPolicy::new(mdp, probs)
    }

    /// Greedy action per state for one goal slot (lowest index on ties).
    pub fn greedy_actions(&self, slot: usize) -> Vec<usize> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(s, slot);
                (0..row.len()).fold(0, |best, a| if row[a] > row[best] { a } else { best })
            })
            .collect()
    }

    /// Sequential soft TD updates:
    /// `Q <- Q + lr (r + gamma (1 - done) V_soft(s') - Q)`, where `done` means
    /// the goal was entered or `s'` is the absorbing state. Hitting the step
    /// cap alone still bootstraps.
    pub fn td_update(
        &mut self,
        mdp: &TabularGoalMdp,
        batch: &[(TransitionRecord, f64)],
    ) -> Result<()> {
        for (t, r) in batch {
            check_index("state", t.s, self.n_states)?;
            check_index("state", t.s_next, self.n_states)?;
            check_index("action", t.a, self.n_actions)?;
            let slot = mdp.require_goal_slot(t.g)?;
            let done = t.goal_reached || t.s_next == mdp.absorbing();
            let bootstrap = if done {
                0.0
            } else {
                self.soft_value_at(t.s_next, slot)
            };
            let target = r + self.gamma * bootstrap;
            let i = self.offset(t.s, slot) + t.a;
            self.q[i] += self.lr * (target - self.q[i]);
            if !self.q[i].is_finite() {
                return Err(Error::NonFinite("soft Q update"));
            }
        }
        Ok(())
    }
}

/// Exact soft value iteration for a fixed reward `r(s, a, s')` under one goal.
/// Used as the fixed point that [`SoftQTable::td_update`] converges to.
pub fn soft_value_iteration(
    mdp: &TabularGoalMdp,
    goal: usize,
    alpha: f64,
    reward: impl Fn(usize, usize, usize) -> f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let slot = mdp.require_goal_slot(goal)?;
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let gamma = mdp.gamma();
    let mut q = vec![0.0; n * na];
    loop {
        let mut next = vec![0.0; n * na];
        for s in 0..n {
            for a in 0..na {
                next[s * na + a] = mdp
                    .outcomes(slot, s, a)
                    .iter()
                    .map(|&(sp, p)| {
                        let done = sp == goal || sp == mdp.absorbing();
                        let boot = if done {
                            0.0
                        } else {
                            soft_value(&q[sp * na..(sp + 1) * na], alpha)
                        };
                        p * (reward(s, a, sp) + gamma * boot)
                    })
                    .sum();
            }
        }
        let delta = q
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if delta < tol {
            return Ok(q);
        }
    }
}

/// Shannon entropy of a distribution, in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * libm::log(*x))
        .sum::<f64>()
}
