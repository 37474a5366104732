//! Exact quantities on finite MDPs: the time-step distance `d_T` of a policy,
//! the optimal distance, discounted occupancy, the Wasserstein-1 distance of
//! the occupancy to the goal (directly and through its closed form in
//! `d_T` and the Jensen gap), and brute-force policy enumeration.
//!
//! Conventions used throughout:
//! * the absorbing state sits at distance 0 from every goal and has value 1,
//!   i.e. it is identified with the goal it follows;
//! * `V(s) = E[gamma^T]`, where `T` is the first time the goal is entered;
//! * states that reach the goal with probability below one are at distance
//!   `+inf`.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::linalg::Dense;
use crate::mdp::TabularGoalMdp;

/// Residual threshold for value iteration on the optimal distance.
pub const VI_TOL: f64 = 1e-10;
/// Probability mass left in the tail when truncating hitting-time sums.
pub const TAIL_TOL: f64 = 1e-12;
/// Default cap on the number of deterministic policies to enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Table of action probabilities `pi(a | s, g)` for every goal in the MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    n_states: usize,
    n_actions: usize,
    n_goals: usize,
    /// Indexed by `(slot * n_states + s) * n_actions + a`.
    probs: Vec<f64>,
}

impl StochasticPolicy {
    /// Wrap a probability table after checking every row.
    pub fn new(mdp: &TabularGoalMdp, probs: Vec<f64>) -> Result<Self> {
        let (n_states, n_actions, n_goals) = (mdp.n_states(), mdp.n_actions(), mdp.n_goals());
        if probs.len() != n_goals * n_states * n_actions {
            return Err(Error::InvalidDistribution(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                n_goals * n_states * n_actions
            )));
        }
        for (i, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "row {i} has a negative entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidDistribution(format!(
                    "row {i} sums to {total}"
                )));
            }
        }
        Ok(StochasticPolicy {
            n_states,
            n_actions,
            n_goals,
            probs,
        })
    }

    pub fn uniform(mdp: &TabularGoalMdp) -> Self {
        let n_actions = mdp.n_actions();
        StochasticPolicy {
            n_states: mdp.n_states(),
            n_actions,
            n_goals: mdp.n_goals(),
            probs: vec![1.0 / n_actions as f64; mdp.n_goals() * mdp.n_states() * n_actions],
        }
    }

    /// Deterministic policy; `actions` is indexed by `slot * n_states + s`.
    pub fn deterministic(mdp: &TabularGoalMdp, actions: &[usize]) -> Result<Self> {
        let n_actions = mdp.n_actions();
        if actions.len() != mdp.n_goals() * mdp.n_states() {
            return Err(Error::InvalidArgument(format!(
                "expected {} actions, got {}",
                mdp.n_goals() * mdp.n_states(),
                actions.len()
            )));
        }
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (i, &a) in actions.iter().enumerate() {
            check_index("action", a, n_actions)?;
            probs[i * n_actions + a] = 1.0;
        }
        Ok(StochasticPolicy {
            n_states: mdp.n_states(),
            n_actions,
            n_goals: mdp.n_goals(),
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_goals(&self) -> usize {
        self.n_goals
    }

    pub fn row(&self, slot: usize, s: usize) -> &[f64] {
        let start = (slot * self.n_states + s) * self.n_actions;
        &self.probs[start..start + self.n_actions]
    }

    pub fn row_mut(&mut self, slot: usize, s: usize) -> &mut [f64] {
        let start = (slot * self.n_states + s) * self.n_actions;
        &mut self.probs[start..start + self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn check_matches(&self, mdp: &TabularGoalMdp) -> Result<()> {
        if self.n_states != mdp.n_states()
            || self.n_actions != mdp.n_actions()
            || self.n_goals != mdp.n_goals()
        {
            return Err(Error::InvalidArgument(format!(
                "policy shape {}x{}x{} does not match the MDP ({}x{}x{})",
                self.n_goals,
                self.n_states,
                self.n_actions,
                mdp.n_goals(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Markov chain induced by a policy under one goal: `rows[s]` lists
/// `(s', P_pi(s' | s))`.
#[derive(Debug, Clone)]
pub(crate) struct Chain {
    rows: Vec<Vec<(usize, f64)>>,
    goal: usize,
    absorbing: usize,
}

impl Chain {
    fn from_policy(mdp: &TabularGoalMdp, policy: &StochasticPolicy, goal: usize) -> Result<Self> {
        policy.check_matches(mdp)?;
        let slot = mdp.require_goal_slot(goal)?;
        let rows = (0..mdp.n_states())
            .map(|s| {
                let mut row: Vec<(usize, f64)> = Vec::new();
                for (a, &pa) in policy.row(slot, s).iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for &(next, p) in mdp.outcomes(slot, s, a) {
                        match row.iter_mut().find(|(n, _)| *n == next) {
                            Some(e) => e.1 += pa * p,
                            None => row.push((next, pa * p)),
                        }
                    }
                }
                row
            })
            .collect();
        Ok(Chain {
            rows,
            goal,
            absorbing: mdp.absorbing(),
        })
    }

    fn deterministic(mdp: &TabularGoalMdp, slot: usize, actions: &[usize]) -> Self {
        let rows = (0..mdp.n_states())
            .map(|s| mdp.outcomes(slot, s, actions[s]).to_vec())
            .collect();
        Chain {
            rows,
            goal: mdp.goals()[slot],
            absorbing: mdp.absorbing(),
        }
    }

    fn n(&self) -> usize {
        self.rows.len()
    }

    /// States that enter the goal with probability one. Decided on the
    /// support graph, so no tolerance is involved: a state is sure to arrive
    /// iff it cannot reach any state from which the goal is unreachable.
    fn sure_to_arrive(&self) -> Vec<bool> {
        let n = self.n();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, row) in self.rows.iter().enumerate() {
            if s == self.goal || s == self.absorbing {
                continue;
            }
            for &(next, p) in row {
                if p > 0.0 {
                    preds[next].push(s);
                }
            }
        }
        let can_reach = backward_closure(&preds, &[self.goal]);
        let doomed: Vec<usize> = (0..n)
            .filter(|&s| s != self.absorbing && !can_reach[s])
            .chain(core::iter::once(self.absorbing))
            .collect();
        let may_fail = backward_closure(&preds, &doomed);
        (0..n)
            .map(|s| s == self.goal || (s != self.absorbing && !may_fail[s]))
            .collect()
    }

    /// Solve `x(s) = base + scale * sum_{s'} P(s, s') x(s')` on the states in
    /// `active`, with `x` fixed to `boundary(s')` outside `active`.
    fn solve_on(
        &self,
        active: &[bool],
        base: f64,
        scale: f64,
        boundary: impl Fn(usize) -> f64,
    ) -> Option<Vec<f64>> {
        let idx: Vec<usize> = (0..self.n()).filter(|&s| active[s]).collect();
        let mut local = vec![usize::MAX; self.n()];
        for (i, &s) in idx.iter().enumerate() {
            local[s] = i;
        }
        let mut m = Dense::identity(idx.len());
        let mut rhs = vec![base; idx.len()];
        for (i, &s) in idx.iter().enumerate() {
            for &(next, p) in &self.rows[s] {
                if active[next] {
                    m.add(i, local[next], -scale * p);
                } else {
                    rhs[i] += scale * p * boundary(next);
                }
            }
        }
        let x = m.solve(rhs)?;
        let mut out = vec![0.0; self.n()];
        for (i, &s) in idx.iter().enumerate() {
            out[s] = x[i];
        }
        Some(out)
    }

    fn hitting_times(&self) -> Vec<f64> {
        let sure = self.sure_to_arrive();
        let active: Vec<bool> = (0..self.n()).map(|s| sure[s] && s != self.goal).collect();
        let mut d = match self.solve_on(&active, 1.0, 1.0, |_| 0.0) {
            Some(d) => d,
            None => vec![f64::INFINITY; self.n()],
        };
        for s in 0..self.n() {
            // Escape probabilities near underflow make the system numerically
            // singular; a non-goal state needs at least one step.
            if !sure[s] || d[s].is_nan() || d[s] < 1.0 - 1e-9 {
                d[s] = f64::INFINITY;
            }
        }
        d[self.goal] = 0.0;
        d[self.absorbing] = 0.0;
        d
    }

    /// `E[gamma^T]` per state.
    fn discounted_arrival(&self, gamma: f64) -> Vec<f64> {
        let active: Vec<bool> = (0..self.n())
            .map(|s| s != self.goal && s != self.absorbing)
            .collect();
        let goal = self.goal;
        let mut v = self
            .solve_on(&active, 0.0, gamma, |s| if s == goal { 1.0 } else { 0.0 })
            .expect("I - gamma P is nonsingular for gamma < 1");
        v[self.goal] = 1.0;
        v[self.absorbing] = 1.0;
        v
    }

    fn occupancy(&self, rho0: &[f64], gamma: f64) -> Vec<f64> {
        let n = self.n();
        let mut m = Dense::identity(n);
        for (s, row) in self.rows.iter().enumerate() {
            for &(next, p) in row {
                // (I - gamma P^T)
                m.add(next, s, -gamma * p);
            }
        }
        let rhs = rho0.iter().map(|p| (1.0 - gamma) * p).collect();
        m.solve(rhs)
            .expect("I - gamma P^T is nonsingular for gamma < 1")
    }
}

/// States from which any of `targets` is reachable along `preds` edges
/// (targets included).
fn backward_closure(preds: &[Vec<usize>], targets: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; preds.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &t in targets {
        if !seen[t] {
            seen[t] = true;
            queue.push_back(t);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}

/// Expected number of steps to first enter `goal` from each state under
/// `policy`. `+inf` where arrival is not certain.
pub fn hitting_time_metric(
    mdp: &TabularGoalMdp,
    policy: &StochasticPolicy,
    goal: usize,
) -> Result<Vec<f64>> {
    Ok(Chain::from_policy(mdp, policy, goal)?.hitting_times())
}

/// `V^pi(s | g) = E[gamma^T]`: the value of reward one collected on arrival,
/// undiscounted for the arrival step itself.
pub fn arrival_value(
    mdp: &TabularGoalMdp,
    policy: &StochasticPolicy,
    goal: usize,
) -> Result<Vec<f64>> {
    Ok(Chain::from_policy(mdp, policy, goal)?.discounted_arrival(mdp.gamma()))
}

/// Discounted state-visitation distribution
/// `(1 - gamma) sum_t gamma^t P(s_t = s)`, from an exact linear solve.
pub fn occupancy(mdp: &TabularGoalMdp, policy: &StochasticPolicy, goal: usize) -> Result<Vec<f64>> {
    Ok(Chain::from_policy(mdp, policy, goal)?.occupancy(mdp.rho0(), mdp.gamma()))
}

fn w1_from(occupancy: &[f64], d_t: &[f64]) -> f64 {
    occupancy
        .iter()
        .zip(d_t)
        .filter(|(rho, _)| **rho > 0.0)
        .map(|(rho, d)| rho * d)
        .sum()
}

/// Wasserstein-1 distance between the occupancy and the goal's Dirac under
/// the policy's own time-step metric: `sum_s rho(s) d_T(s, g)`.
pub fn wasserstein_primal(
    mdp: &TabularGoalMdp,
    policy: &StochasticPolicy,
    goal: usize,
) -> Result<f64> {
    let chain = Chain::from_policy(mdp, policy, goal)?;
    Ok(w1_from(
        &chain.occupancy(mdp.rho0(), mdp.gamma()),
        &chain.hitting_times(),
    ))
}

/// `h(mu) = mu + gamma / (1 - gamma) * gamma^mu`, increasing in `mu`.
pub fn h(mu: f64, gamma: f64) -> f64 {
    mu + gamma / (1.0 - gamma) * libm::pow(gamma, mu)
}

fn analytic_from(rho0: &[f64], d_t: &[f64], value: &[f64], gamma: f64) -> f64 {
    let c = gamma / (1.0 - gamma);
    rho0.iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(s, p)| {
            let d = d_t[s];
            if d.is_infinite() {
                return f64::INFINITY;
            }
            let jensen = value[s] - libm::pow(gamma, d);
            p * (h(d, gamma) + c * (jensen - 1.0))
        })
        .sum()
}

/// The same distance through its closed form over start states:
/// `E_{s0}[h(d_T(s0)) + gamma/(1-gamma) (Jensen(s0) - 1)]`.
pub fn wasserstein_analytic(
    mdp: &TabularGoalMdp,
    policy: &StochasticPolicy,
    goal: usize,
) -> Result<f64> {
    let chain = Chain::from_policy(mdp, policy, goal)?;
    let d = chain.hitting_times();
    let v = chain.discounted_arrival(mdp.gamma());
    Ok(analytic_from(mdp.rho0(), &d, &v, mdp.gamma()))
}

/// `V^pi(s) - gamma^{d_T(s)}` per state.
pub fn jensen_gap(value: &[f64], d_t: &[f64], gamma: f64) -> Vec<f64> {
    value
        .iter()
        .zip(d_t)
        .map(|(v, d)| v - libm::pow(gamma, *d))
        .collect()
}

/// Both sides of the finite geometric-sum identity behind the closed form:
/// `sum_{t<T} (1-gamma) gamma^t (T-t)` and `T - gamma/(1-gamma) (1 - gamma^T)`.
pub fn geometric_sum_identity(t: u32, gamma: f64) -> Result<(f64, f64)> {
    if t == 0 {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} outside [0, 1)"
        )));
    }
    let mut lhs = 0.0;
    let mut gt = 1.0;
    for step in 0..t {
        lhs += (1.0 - gamma) * gt * f64::from(t - step);
        gt *= gamma;
    }
    let rhs = f64::from(t) - gamma / (1.0 - gamma) * (1.0 - libm::pow(gamma, f64::from(t)));
    Ok((lhs, rhs))
}

/// Variance of the hitting time per state, from the truncated survival
/// function `P(T > t)`. `+inf` where arrival is not certain.
pub fn hitting_time_variance(
    mdp: &TabularGoalMdp,
    policy: &StochasticPolicy,
    goal: usize,
) -> Result<Vec<f64>> {
    let chain = Chain::from_policy(mdp, policy, goal)?;
    let sure = chain.sure_to_arrive();
    let n = chain.n();
    let is_live: Vec<bool> = (0..n).map(|s| sure[s] && s != goal).collect();
    let live: Vec<usize> = (0..n).filter(|&s| is_live[s]).collect();
    // survival[s] = P(T > t | s_0 = s); zero off the live set.
    let mut survival: Vec<f64> = is_live.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut mean = vec![0.0; n];
    let mut second = vec![0.0; n];
    let max_steps = 50_000_000 / n.max(1);
    for t in 0..max_steps {
        let remaining = live.iter().map(|&s| survival[s]).fold(0.0, f64::max);
        if remaining < TAIL_TOL {
            break;
        }
        for &s in &live {
            mean[s] += survival[s];
            second[s] += (2 * t + 1) as f64 * survival[s];
        }
        survival = (0..n)
            .map(|s| {
                if is_live[s] {
                    chain.rows[s].iter().map(|&(sp, p)| p * survival[sp]).sum()
                } else {
                    0.0
                }
            })
            .collect();
    }
    Ok((0..n)
        .map(|s| {
            if s == goal || s == chain.absorbing {
                0.0
            } else if !sure[s] {
                f64::INFINITY
            } else {
                (second[s] - mean[s] * mean[s]).max(0.0)
            }
        })
        .collect())
}

/// Minimum expected steps to the goal over all policies, by value iteration
/// restricted to actions that keep arrival certain.
pub fn optimal_distance(mdp: &TabularGoalMdp, goal: usize) -> Result<Vec<f64>> {
    let slot = mdp.require_goal_slot(goal)?;
    let n = mdp.n_states();
    let absorbing = mdp.absorbing();
    let safe = almost_sure_region(mdp, slot);
    let allowed = |s: usize, a: usize| mdp.outcomes(slot, s, a).iter().all(|&(sp, _)| safe[sp]);

    let mut d = vec![0.0; n];
    let max_iter = 10_000_000 / n.max(1);
    for _ in 0..max_iter {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            if s == goal || s == absorbing || !safe[s] {
                continue;
            }
            let best = (0..mdp.n_actions())
                .filter(|&a| allowed(s, a))
                .map(|a| {
                    mdp.outcomes(slot, s, a)
                        .iter()
                        .map(|&(sp, p)| p * d[sp])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            let updated = 1.0 + best;
            residual = residual.max((updated - d[s]).abs());
            d[s] = updated;
        }
        if residual < VI_TOL {
            break;
        }
    }
    for s in 0..n {
        if !safe[s] {
            d[s] = f64::INFINITY;
        }
    }
    d[goal] = 0.0;
    d[absorbing] = 0.0;
    Ok(d)
}

/// States from which some policy enters the goal with probability one.
fn almost_sure_region(mdp: &TabularGoalMdp, slot: usize) -> Vec<bool> {
    let n = mdp.n_states();
    let goal = mdp.goals()[slot];
    let absorbing = mdp.absorbing();
    let mut region: Vec<bool> = (0..n).map(|s| s != absorbing).collect();
    loop {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            if s == goal || !region[s] {
                continue;
            }
            for a in 0..mdp.n_actions() {
                let row = mdp.outcomes(slot, s, a);
                if row.iter().all(|&(sp, _)| region[sp]) {
                    for &(sp, _) in row {
                        preds[sp].push(s);
                    }
                }
            }
        }
        let reach = backward_closure(&preds, &[goal]);
        let next: Vec<bool> = (0..n).map(|s| region[s] && reach[s]).collect();
        if next == region {
            return region;
        }
        region = next;
    }
}

/// Deterministic policy that is greedy on the optimal distance for every
/// goal; ties go to the lowest action index.
pub fn optimal_policy(mdp: &TabularGoalMdp) -> Result<StochasticPolicy> {
    let n = mdp.n_states();
    let mut actions = vec![0usize; mdp.n_goals() * n];
    for (slot, &g) in mdp.goals().iter().enumerate() {
        let d = optimal_distance(mdp, g)?;
        for s in 0..n {
            let mut best = (0, f64::INFINITY);
            for a in 0..mdp.n_actions() {
                let q: f64 = mdp
                    .outcomes(slot, s, a)
                    .iter()
                    .map(|&(sp, p)| p * d[sp])
                    .sum();
                if q < best.1 - 1e-12 {
                    best = (a, q);
                }
            }
            actions[slot * n + s] = best.0;
        }
    }
    StochasticPolicy::deterministic(mdp, &actions)
}

/// Every exact quantity for one `(policy, goal)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub goal: usize,
    pub d_t: Vec<f64>,
    pub occupancy: Vec<f64>,
    pub w1_primal: f64,
    pub w1_analytic: f64,
    pub value: Vec<f64>,
    pub jensen_gap: Vec<f64>,
}

pub fn oracle_report(
    mdp: &TabularGoalMdp,
    policy: &StochasticPolicy,
    goal: usize,
) -> Result<OracleReport> {
    let chain = Chain::from_policy(mdp, policy, goal)?;
    let gamma = mdp.gamma();
    let d_t = chain.hitting_times();
    let occupancy = chain.occupancy(mdp.rho0(), gamma);
    let value = chain.discounted_arrival(gamma);
    Ok(OracleReport {
        goal,
        w1_primal: w1_from(&occupancy, &d_t),
        w1_analytic: analytic_from(mdp.rho0(), &d_t, &value, gamma),
        jensen_gap: jensen_gap(&value, &d_t, gamma),
        d_t,
        occupancy,
        value,
    })
}

/// Outcome of exhaustive search over deterministic policies for one goal.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySets {
    /// States whose action is enumerated (everything but the goal and the
    /// absorbing state, where actions have no effect).
    pub free_states: Vec<usize>,
    /// Minimizers of the start-distribution Wasserstein distance; each entry
    /// lists one action per state in `free_states`.
    pub argmin_w1: Vec<Vec<usize>>,
    /// Maximizers of the start-distribution expected return.
    pub argmax_return: Vec<Vec<usize>>,
    pub best_w1: f64,
    pub best_return: f64,
}

/// Enumerate every deterministic policy for `goal` and collect the
/// Wasserstein minimizers and return maximizers, scored on `rho0`. Ties are
/// within `1e-9` relative.
pub fn enumerate_optimal_policies(
    mdp: &TabularGoalMdp,
    goal: usize,
    limit: u128,
) -> Result<PolicySets> {
    let slot = mdp.require_goal_slot(goal)?;
    let free_states: Vec<usize> = (0..mdp.n_states())
        .filter(|&s| s != goal && s != mdp.absorbing())
        .collect();
    let n_actions = mdp.n_actions();
    let mut count: u128 = 1;
    for _ in &free_states {
        count = count.saturating_mul(n_actions as u128);
        if count > limit {
            return Err(Error::TooLarge {
                policies: count,
                limit,
            });
        }
    }

    let gamma = mdp.gamma();
    let mut scored: Vec<(Vec<usize>, f64, f64)> = Vec::with_capacity(count as usize);
    let mut choice = vec![0usize; free_states.len()];
    let mut actions = vec![0usize; mdp.n_states()];
    for _ in 0..count {
        for (i, &s) in free_states.iter().enumerate() {
            actions[s] = choice[i];
        }
        let chain = Chain::deterministic(mdp, slot, &actions);
        let w1 = w1_from(&chain.occupancy(mdp.rho0(), gamma), &chain.hitting_times());
        let value = chain.discounted_arrival(gamma);
        let ret: f64 = mdp.rho0().iter().zip(&value).map(|(p, v)| p * v).sum();
        scored.push((choice.clone(), w1, ret));
        // odometer increment
        for digit in choice.iter_mut() {
            *digit += 1;
            if *digit < n_actions {
                break;
            }
            *digit = 0;
        }
    }

    let best_w1 = scored.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let best_return = scored.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max);
    let close = |a: f64, b: f64| {
        a == b
            || (a.is_finite()
                && b.is_finite()
                && (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0))
    };
    Ok(PolicySets {
        argmin_w1: scored
            .iter()
            .filter(|x| close(x.1, best_w1))
            .map(|x| x.0.clone())
            .collect(),
        argmax_return: scored
            .iter()
            .filter(|x| close(x.2, best_return))
            .map(|x| x.0.clone())
            .collect(),
        free_states,
        best_w1,
        best_return,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularGoalMdp;

    /// s0 -> goal with probability `p`, else stay. States: s0, goal, absorbing.
    fn coin_chain(p: f64, gamma: f64) -> TabularGoalMdp {
        let base = if p < 1.0 {
            vec![vec![(1, p), (0, 1.0 - p)], vec![(1, 1.0)]]
        } else {
            vec![vec![(1, 1.0)], vec![(1, 1.0)]]
        };
        TabularGoalMdp::from_base_dynamics(2, 1, &base, vec![1], &[1.0, 0.0], vec![1.0], gamma)
            .unwrap()
    }

    fn corridor(len: usize, gamma: f64) -> TabularGoalMdp {
        // actions: 0 = left, 1 = right; goal at the right end
        let mut base = Vec::new();
        for s in 0..len {
            base.push(vec![(s.saturating_sub(1), 1.0)]);
            base.push(vec![((s + 1).min(len - 1), 1.0)]);
        }
        let mut rho0 = vec![0.0; len];
        rho0[0] = 1.0;
        TabularGoalMdp::from_base_dynamics(len, 2, &base, vec![len - 1], &rho0, vec![1.0], gamma)
            .unwrap()
    }

    #[test]
    fn goal_distance_is_zero() {
        let mdp = coin_chain(0.5, 0.9);
        let d = hitting_time_metric(&mdp, &StochasticPolicy::uniform(&mdp), 1).unwrap();
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn coin_hitting_time_is_two() {
        let mdp = coin_chain(0.5, 0.9);
        let d = hitting_time_metric(&mdp, &StochasticPolicy::uniform(&mdp), 1).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn corridor_distances() {
        let mdp = corridor(3, 0.9);
        let right = StochasticPolicy::deterministic(&mdp, &[1, 1, 1, 1]).unwrap();
        let d = hitting_time_metric(&mdp, &right, 2).unwrap();
        assert_eq!(&d[..3], &[2.0, 1.0, 0.0]);
        let left = StochasticPolicy::deterministic(&mdp, &[0, 0, 0, 0]).unwrap();
        let d = hitting_time_metric(&mdp, &left, 2).unwrap();
        assert!(d[0].is_infinite() && d[1].is_infinite());
    }

    #[test]
    fn occupancy_of_hop() {
        let mdp = coin_chain(1.0, 0.5);
        let rho = occupancy(&mdp, &StochasticPolicy::uniform(&mdp), 1).unwrap();
        for (got, want) in rho.iter().zip([0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn occupancy_from_goal_start() {
        // Start at the goal: the chain moves to the absorbing state at once,
        // so mass splits (1 - gamma, gamma) between goal and absorbing state.
        let mdp = coin_chain(1.0, 0.5)
            .with_distributions(vec![0.0, 1.0, 0.0], vec![1.0])
            .unwrap();
        let rho = occupancy(&mdp, &StochasticPolicy::uniform(&mdp), 1).unwrap();
        assert!((rho[1] - 0.5).abs() < 1e-15 && (rho[2] - 0.5).abs() < 1e-15);
        assert_eq!(
            wasserstein_primal(&mdp, &StochasticPolicy::uniform(&mdp), 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn hop_w1_primal_and_analytic() {
        let mdp = coin_chain(1.0, 0.5);
        let pi = StochasticPolicy::uniform(&mdp);
        assert!((wasserstein_primal(&mdp, &pi, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((wasserstein_analytic(&mdp, &pi, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stochastic_coin_agreement() {
        // p = 0.5, gamma = 0.5. By hand: rho(s0) = 0.5 / (1 - 0.25) = 2/3 and
        // d(s0) = 2, so W1 = 4/3. E[gamma^T] = 0.25 / 0.75 = 1/3.
        let mdp = coin_chain(0.5, 0.5);
        let pi = StochasticPolicy::uniform(&mdp);
        let primal = wasserstein_primal(&mdp, &pi, 1).unwrap();
        let analytic = wasserstein_analytic(&mdp, &pi, 1).unwrap();
        assert!((primal - 4.0 / 3.0).abs() < 1e-14);
        assert!((analytic - 4.0 / 3.0).abs() < 1e-14);
        let v = arrival_value(&mdp, &pi, 1).unwrap();
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_identity_examples() {
        let (l, r) = geometric_sum_identity(1, 0.5).unwrap();
        assert!((l - 0.5).abs() < 1e-15 && (r - 0.5).abs() < 1e-15);
        let (l, r) = geometric_sum_identity(2, 0.5).unwrap();
        assert!((l - 1.25).abs() < 1e-15 && (r - 1.25).abs() < 1e-15);
        for t in 1..10 {
            assert_eq!(
                geometric_sum_identity(t, 0.0).unwrap(),
                (f64::from(t), f64::from(t))
            );
        }
        assert!(geometric_sum_identity(0, 0.5).is_err());
        assert!(geometric_sum_identity(3, 1.0).is_err());
    }

    #[test]
    fn coin_variance() {
        // geometric(p = 0.5): Var = (1 - p) / p^2 = 2
        let mdp = coin_chain(0.5, 0.9);
        let var = hitting_time_variance(&mdp, &StochasticPolicy::uniform(&mdp), 1).unwrap();
        assert!((var[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn optimal_distance_on_corridor() {
        let mdp = corridor(4, 0.9);
        let d = optimal_distance(&mdp, 3).unwrap();
        assert_eq!(d, vec![3.0, 2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn stuck_start_keeps_rho0() {
        let base = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        let mdp =
            TabularGoalMdp::from_base_dynamics(2, 1, &base, vec![1], &[1.0, 0.0], vec![1.0], 0.7)
                .unwrap();
        let rho = occupancy(&mdp, &StochasticPolicy::uniform(&mdp), 1).unwrap();
        assert_eq!(rho, mdp.rho0().to_vec());
    }

    #[test]
    fn unreachable_goal_is_infinite() {
        // state 0 loops on itself forever
        let base = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        let mdp =
            TabularGoalMdp::from_base_dynamics(2, 1, &base, vec![1], &[1.0, 0.0], vec![1.0], 0.9)
                .unwrap();
        assert!(optimal_distance(&mdp, 1).unwrap()[0].is_infinite());
        let pi = StochasticPolicy::uniform(&mdp);
        assert!(wasserstein_primal(&mdp, &pi, 1).unwrap().is_infinite());
        let report = oracle_report(&mdp, &pi, 1).unwrap();
        assert!(report.d_t[0].is_infinite());
        assert_eq!(report.value[0], 0.0);
    }

    #[test]
    fn corridor_enumeration_is_unique() {
        let mdp = corridor(3, 0.99);
        let sets = enumerate_optimal_policies(&mdp, 2, ENUMERATION_LIMIT).unwrap();
        assert_eq!(sets.free_states, vec![0, 1]);
        assert_eq!(sets.argmin_w1, vec![vec![1, 1]]);
        assert_eq!(sets.argmax_return, sets.argmin_w1);
    }

    #[test]
    fn enumeration_refuses_large_instances() {
        let mdp = corridor(30, 0.9);
        assert!(matches!(
            enumerate_optimal_policies(&mdp, 29, ENUMERATION_LIMIT),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn h_is_increasing() {
        for k in 1..100 {
            let gamma = k as f64 / 100.0;
            for i in 0..500 {
                let mu = i as f64 * 0.1;
                assert!(h(mu + 1e-3, gamma) > h(mu, gamma));
            }
        }
    }
}
