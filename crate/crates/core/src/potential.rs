//! Tabular Kantorovich potential `f(s, g)`, its adversarial loss with the
//! transition-based Lipschitz penalty, and the intrinsic rewards built from it.
//!
//! The loss over a batch is
//!
//! ```text
//! L = -mean_g f(g, g) + mean_(s,g) f(s, g)
//!     + lambda * mean_(s,s',g) max(|f(s,g) - f(s',g)| - 1, 0)^2
//! ```
//!
//! Minimizing it pushes the potential up at goals, down where the agent
//! spends time, and keeps it 1-Lipschitz across observed transitions, which
//! is what makes `f(g,g) - E f(s,g)` an estimate of the Wasserstein-1
//! distance under the time-step quasimetric.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::mdp::{TabularGoalMdp, TransitionRecord};

/// Transitions whose `|f(s) - f(s')|` exceeds `1 + VIOLATION_TOL` count as
/// violations in [`lipschitz_violation`].
pub const VIOLATION_TOL: f64 = 0.05;

pub const DEFAULT_LAMBDA: f64 = 1000.0;
pub const DEFAULT_STEP_SIZE: f64 = 0.003;

/// Learnable potential, one entry per `(state, goal slot)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    n_states: usize,
    n_goals: usize,
    values: Vec<f64>,
    lambda: f64,
    step_size: f64,
    #[serde(skip)]
    grad_accum: Vec<f64>,
}

/// One batch for the potential loss. Goals and states are state indices;
/// every goal must be in the MDP's goal set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PotentialBatch {
    /// Goals whose own potential `f(g, g)` is pushed up.
    pub goals: Vec<usize>,
    /// `(s, g)` pairs drawn from the agent's visitation.
    pub states: Vec<(usize, usize)>,
    /// `(s, s', g)` transitions for the Lipschitz penalty.
    pub transitions: Vec<(usize, usize, usize)>,
}

impl PotentialBatch {
    /// Build all three parts from replay records: each record contributes its
    /// goal, its visited state `s`, and its transition.
    pub fn from_records(records: &[TransitionRecord]) -> Self {
        PotentialBatch {
            goals: records.iter().map(|r| r.g).collect(),
            states: records.iter().map(|r| (r.s, r.g)).collect(),
            transitions: records.iter().map(|r| (r.s, r.s_next, r.g)).collect(),
        }
    }
}

impl PotentialTable {
    pub fn new(mdp: &TabularGoalMdp, lambda: f64, step_size: f64) -> Result<Self> {
        Self::with_shape(mdp.n_states(), mdp.n_goals(), lambda, step_size)
    }

    /// Zero-initialized table for `n_states x n_goals`. Goal slots index the
    /// columns; lookups by goal state need a slot map (see [`Self::get`]).
    pub fn with_shape(
        n_states: usize,
        n_goals: usize,
        lambda: f64,
        step_size: f64,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda {lambda} must be finite and >= 0"
            )));
        }
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size {step_size} must be positive"
            )));
        }
        Ok(PotentialTable {
            n_states,
            n_goals,
            values: vec![0.0; n_states * n_goals],
            lambda,
            step_size,
            grad_accum: vec![0.0; n_states * n_goals],
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_goals(&self) -> usize {
        self.n_goals
    }

    #[inline]
    fn at(&self, s: usize, slot: usize) -> usize {
        slot * self.n_states + s
    }

    /// `f(s, g)` with `g` given by goal slot.
    pub fn value(&self, s: usize, slot: usize) -> f64 {
        self.values[self.at(s, slot)]
    }

    pub fn set_value(&mut self, s: usize, slot: usize, v: f64) {
        let i = self.at(s, slot);
        self.values[i] = v;
    }

    /// `f(s, g)` with `g` given by state index.
    pub fn get(&self, mdp: &TabularGoalMdp, s: usize, goal: usize) -> Result<f64> {
        check_index("state", s, self.n_states)?;
        let slot = mdp.require_goal_slot(goal)?;
        Ok(self.value(s, slot))
    }

    /// Values for one goal slot, indexed by state.
    pub fn column(&self, slot: usize) -> &[f64] {
        &self.values[slot * self.n_states..(slot + 1) * self.n_states]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Largest potential over states for one goal slot.
    pub fn max_over_states(&self, slot: usize) -> f64 {
        self.column(slot)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn resolve(&self, mdp: &TabularGoalMdp, s: usize, goal: usize) -> Result<usize> {
        check_index("state", s, self.n_states)?;
        let slot = mdp.require_goal_slot(goal)?;
        Ok(self.at(s, slot))
    }

    /// Evaluate the loss on a batch.
    pub fn loss(&self, mdp: &TabularGoalMdp, batch: &PotentialBatch) -> Result<f64> {
        check_batch(batch)?;
        let mut loss = 0.0;
        if !batch.goals.is_empty() {
            let mut acc = 0.0;
            for &g in &batch.goals {
                acc += self.values[self.resolve(mdp, g, g)?];
            }
            loss -= acc / batch.goals.len() as f64;
        }
        if !batch.states.is_empty() {
            let mut acc = 0.0;
            for &(s, g) in &batch.states {
                acc += self.values[self.resolve(mdp, s, g)?];
            }
            loss += acc / batch.states.len() as f64;
        }
        if !batch.transitions.is_empty() {
            let mut acc = 0.0;
            for &(s, sp, g) in &batch.transitions {
                let excess = (self.values[self.resolve(mdp, s, g)?]
                    - self.values[self.resolve(mdp, sp, g)?])
                .abs()
                    - 1.0;
                if excess > 0.0 {
                    acc += excess * excess;
                }
            }
            loss += self.lambda * acc / batch.transitions.len() as f64;
        }
        Ok(loss)
    }

    /// Exact gradient of [`Self::loss`] with respect to every table entry,
    /// left in the scratch buffer and returned. The penalty's subgradient is
    /// zero at the kink `|f(s) - f(s')| = 1`.
    pub fn gradient(&mut self, mdp: &TabularGoalMdp, batch: &PotentialBatch) -> Result<&[f64]> {
        check_batch(batch)?;
        let mut grad = core::mem::take(&mut self.grad_accum);
        grad.clear();
        grad.resize(self.values.len(), 0.0);
        let result = self.accumulate_gradient(mdp, batch, |i, d| grad[i] += d);
        self.grad_accum = grad;
        result?;
        Ok(&self.grad_accum)
    }

    /// Feed every nonzero gradient contribution `(entry, amount)` to `add`.
    fn accumulate_gradient(
        &self,
        mdp: &TabularGoalMdp,
        batch: &PotentialBatch,
        mut add: impl FnMut(usize, f64),
    ) -> Result<()> {
        if !batch.goals.is_empty() {
            let w = 1.0 / batch.goals.len() as f64;
            for &g in &batch.goals {
                add(self.resolve(mdp, g, g)?, -w);
            }
        }
        if !batch.states.is_empty() {
            let w = 1.0 / batch.states.len() as f64;
            for &(s, g) in &batch.states {
                add(self.resolve(mdp, s, g)?, w);
            }
        }
        if !batch.transitions.is_empty() {
            let w = self.lambda / batch.transitions.len() as f64;
            for &(s, sp, g) in &batch.transitions {
                let (i, j) = (self.resolve(mdp, s, g)?, self.resolve(mdp, sp, g)?);
                let diff = self.values[i] - self.values[j];
                let excess = diff.abs() - 1.0;
                if excess > 0.0 {
                    let d = w * 2.0 * excess * diff.signum();
                    add(i, d);
                    add(j, -d);
                }
            }
        }
        Ok(())
    }

    /// One plain gradient-descent step on the loss. Only entries the batch
    /// touches are visited, so the cost is independent of the table size.
    pub fn update(&mut self, mdp: &TabularGoalMdp, batch: &PotentialBatch) -> Result<()> {
        check_batch(batch)?;
        let mut contributions = Vec::with_capacity(
            batch.goals.len() + batch.states.len() + 2 * batch.transitions.len(),
        );
        self.accumulate_gradient(mdp, batch, |i, d| contributions.push((i, d)))?;
        let step = self.step_size;
        for &(i, d) in &contributions {
            self.values[i] -= step * d;
        }
        if contributions
            .iter()
            .any(|&(i, _)| !self.values[i].is_finite())
        {
            return Err(Error::NonFinite("potential update"));
        }
        Ok(())
    }
}

fn check_batch(batch: &PotentialBatch) -> Result<()> {
    if batch.goals.is_empty() && batch.states.is_empty() && batch.transitions.is_empty() {
        Err(Error::EmptyBatch("potential batch"))
    } else {
        Ok(())
    }
}

/// How the potential is turned into a per-transition reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// `f(s', g) - max_s f(s, g)`; never positive.
    BiasMax,
    /// `f(s', g) - f(g, g)`.
    GoalAnchor,
    /// Potential-based shaping of the task reward:
    /// `r + gamma f(s', g) - f(s, g)`.
    Pbrs,
}

/// Reward mode plus the per-goal bias used by [`RewardMode::BiasMax`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub mode: RewardMode,
    /// Indexed by goal slot.
    pub bias: Vec<f64>,
    pub gamma: f64,
}

impl RewardSpec {
    pub fn new(mode: RewardMode, potential: &PotentialTable, gamma: f64) -> Self {
        let mut spec = RewardSpec {
            mode,
            bias: vec![0.0; potential.n_goals()],
            gamma,
        };
        spec.refresh(potential);
        spec
    }

    /// Recompute `b = max_s f(s, g)` for every goal.
    pub fn refresh(&mut self, potential: &PotentialTable) {
        self.bias.resize(potential.n_goals(), 0.0);
        for (slot, b) in self.bias.iter_mut().enumerate() {
            *b = potential.max_over_states(slot);
        }
    }
}

/// Intrinsic reward for one transition.
pub fn aim_reward(
    mdp: &TabularGoalMdp,
    potential: &PotentialTable,
    spec: &RewardSpec,
    t: &TransitionRecord,
) -> Result<f64> {
    let slot = mdp.require_goal_slot(t.g)?;
    check_index("state", t.s, potential.n_states())?;
    check_index("state", t.s_next, potential.n_states())?;
    let next = potential.value(t.s_next, slot);
    Ok(match spec.mode {
        RewardMode::BiasMax => next - spec.bias[slot],
        RewardMode::GoalAnchor => next - potential.value(t.g, slot),
        RewardMode::Pbrs => {
            let task = if t.goal_reached { 1.0 } else { 0.0 };
            task + spec.gamma * next - potential.value(t.s, slot)
        }
    })
}

/// `(max excess, fraction of transitions with excess > VIOLATION_TOL)` where
/// excess is `max(|f(s,g) - f(s',g)| - 1, 0)`.
pub fn lipschitz_violation(
    mdp: &TabularGoalMdp,
    potential: &PotentialTable,
    transitions: &[(usize, usize, usize)],
) -> Result<(f64, f64)> {
    if transitions.is_empty() {
        return Err(Error::EmptyBatch("lipschitz_violation transitions"));
    }
    let mut worst: f64 = 0.0;
    let mut violating = 0usize;
    for &(s, sp, g) in transitions {
        let excess =
            ((potential.get(mdp, s, g)? - potential.get(mdp, sp, g)?).abs() - 1.0).max(0.0);
        worst = worst.max(excess);
        if excess > VIOLATION_TOL {
            violating += 1;
        }
    }
    Ok((worst, violating as f64 / transitions.len() as f64))
}

/// Follow the action with the highest expected next-state potential from
/// `start` until `goal` is entered or `max_steps` moves are made. Stops early
/// when no action strictly improves on the current state's value. Returns the
/// visited states, `start` first.
pub fn greedy_ascent(
    mdp: &TabularGoalMdp,
    potential: &PotentialTable,
    start: usize,
    goal: usize,
    max_steps: usize,
) -> Result<Vec<usize>> {
    let slot = mdp.require_goal_slot(goal)?;
    check_index("state", start, mdp.n_states())?;
    let mut path = vec![start];
    let mut s = start;
    while s != goal && path.len() <= max_steps {
        let mut best: Option<(f64, usize)> = None;
        for a in 0..mdp.n_actions() {
            let outcomes = mdp.outcomes(slot, s, a);
            let expected: f64 = outcomes
                .iter()
                .map(|&(sp, p)| p * potential.value(sp, slot))
                .sum();
            if best.is_none_or(|(v, _)| expected > v) {
                best = Some((expected, a));
            }
        }
        let (value, a) = best.expect("at least one action");
        if value <= potential.value(s, slot) {
            break;
        }
        s = mdp
            .outcomes(slot, s, a)
            .iter()
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|&(sp, _)| sp)
            .expect("non-empty outcome row");
        path.push(s);
    }
    Ok(path)
}
