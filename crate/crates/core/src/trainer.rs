//! The AIM training loop: interleaved environment steps, soft-Q updates on
//! rewards from the current potential (or a baseline reward), potential
//! updates on a smaller buffer, and per-epoch evaluation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{self, SoftQTable};
use crate::error::{Error, Result};
use crate::mdp::{TabularGoalMdp, TransitionRecord};
use crate::oracle::{self, StochasticPolicy};
use crate::potential::{self, aim_reward, PotentialBatch, PotentialTable, RewardMode, RewardSpec};
use crate::replay::{relabel_hindsight, HerStrategy, ReplayBuffer};
use crate::rng::SimRng;

/// Source of the reward the agent learns from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Intrinsic reward from the learned potential.
    Aim,
    /// Task reward only: 1 on entering the goal, else 0.
    Sparse,
    /// `-||cell(s') - cell(g)||_2` on grid worlds.
    NegL2,
}

/// Which policy evaluation rollouts follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPolicy {
    Boltzmann,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_epochs: usize,
    /// Environment steps per epoch (K).
    pub steps_per_epoch: usize,
    /// Policy update period in steps (k).
    pub policy_update_period: usize,
    /// Potential update period in steps (m).
    pub potential_update_period: usize,
    /// Episode length cap (T).
    pub episode_cap: usize,
    pub agent_batch: usize,
    pub potential_batch: usize,
    /// TD minibatches per policy update; one update is one iteration
    /// regardless of this count.
    pub policy_steps: usize,
    /// Gradient steps per potential update; 0 freezes the potential.
    pub potential_steps: usize,
    pub agent_buffer: usize,
    pub potential_buffer: usize,
    pub use_her: bool,
    pub her_strategy: HerStrategy,
    /// Only meaningful for the `aim` baseline; `None` means `bias_max`.
    pub reward_mode: Option<RewardMode>,
    pub baseline: Baseline,
    pub alpha: f64,
    pub lr: f64,
    pub lambda: f64,
    pub potential_step_size: f64,
    pub eval_episodes: usize,
    pub eval_policy: EvalPolicy,
    /// Compute the exact Wasserstein distance of the evaluated policy when
    /// the model has at most this many states.
    pub oracle_max_states: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_epochs: 1,
            steps_per_epoch: 1000,
            policy_update_period: 40,
            potential_update_period: 10,
            episode_cap: 50,
            agent_batch: 64,
            potential_batch: 64,
            policy_steps: 40,
            potential_steps: 200,
            agent_buffer: 5000,
            potential_buffer: 5000,
            use_her: false,
            her_strategy: HerStrategy::Future {
                k: crate::replay::DEFAULT_HER_K,
            },
            reward_mode: None,
            baseline: Baseline::Aim,
            alpha: agent::DEFAULT_ALPHA,
            lr: agent::DEFAULT_LR,
            lambda: potential::DEFAULT_LAMBDA,
            potential_step_size: potential::DEFAULT_STEP_SIZE,
            eval_episodes: 100,
            eval_policy: EvalPolicy::Boltzmann,
            oracle_max_states: 400,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad<T>(key: &'static str, reason: alloc::string::String) -> Result<T> {
            Err(Error::Config { key, reason })
        }
        for (key, v) in [
            ("policy_update_period", self.policy_update_period),
            ("potential_update_period", self.potential_update_period),
            ("episode_cap", self.episode_cap),
            ("agent_batch", self.agent_batch),
            ("potential_batch", self.potential_batch),
            ("policy_steps", self.policy_steps),
            ("agent_buffer", self.agent_buffer),
            ("potential_buffer", self.potential_buffer),
        ] {
            if v == 0 {
                return bad(key, "must be at least 1".into());
            }
        }
        if self.steps_per_epoch < self.episode_cap {
            return bad(
                "steps_per_epoch",
                format!(
                    "{} is shorter than episode_cap {}",
                    self.steps_per_epoch, self.episode_cap
                ),
            );
        }
        if let (Some(mode), true) = (self.reward_mode, self.baseline != Baseline::Aim) {
            return bad(
                "reward_mode",
                format!(
                    "{mode:?} only applies to the aim baseline, not {:?}",
                    self.baseline
                ),
            );
        }
        if let HerStrategy::Future { k: 0 } = self.her_strategy {
            return bad("her_strategy", "future relabeling needs k >= 1".into());
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad("alpha", format!("{} must be positive", self.alpha));
        }
        if !(self.lr > 0.0 && self.lr <= 1.0) {
            return bad("lr", format!("{} outside (0, 1]", self.lr));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", format!("{} must be >= 0", self.lambda));
        }
        if !(self.potential_step_size.is_finite() && self.potential_step_size > 0.0) {
            return bad(
                "potential_step_size",
                format!("{} must be positive", self.potential_step_size),
            );
        }
        Ok(())
    }

    pub fn reward_mode(&self) -> RewardMode {
        self.reward_mode.unwrap_or(RewardMode::BiasMax)
    }
}

/// Result of evaluation rollouts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_episode_length: f64,
    pub steps: u64,
    /// Occupancy counts of pre-action states; sums to `steps`.
    pub visitation: Vec<u64>,
    /// `(state, goal)` for every counted step, in rollout order.
    #[serde(skip)]
    pub visited: Vec<(usize, usize)>,
}

/// Run `n_episodes` capped rollouts of a frozen policy. Deterministic given
/// `seed`; nothing is learned.
pub fn evaluate(
    mdp: &TabularGoalMdp,
    policy: &StochasticPolicy,
    n_episodes: usize,
    episode_cap: usize,
    seed: u64,
) -> Result<EvalMetrics> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut m = EvalMetrics {
        visitation: vec![0; mdp.n_states()],
        ..Default::default()
    };
    if n_episodes == 0 {
        return Ok(m);
    }
    let mut total_len = 0usize;
    for _ in 0..n_episodes {
        let (goal, mut s) = mdp.sample_task(&mut rng);
        let slot = mdp.require_goal_slot(goal)?;
        let mut len = 0;
        while len < episode_cap {
            m.visitation[s] += 1;
            m.visited.push((s, goal));
            let a = rng.categorical(policy.row(slot, s));
            let (next, reached) = mdp.step(s, a, goal, &mut rng)?;
            len += 1;
            s = next;
            if reached {
                m.successes += 1;
                break;
            }
        }
        total_len += len;
    }
    m.episodes = n_episodes;
    m.steps = total_len as u64;
    m.success_rate = m.successes as f64 / n_episodes as f64;
    m.mean_episode_length = total_len as f64 / n_episodes as f64;
    Ok(m)
}

/// Dual Wasserstein estimate `f(g, g) - mean_s f(s, g)` over visited states.
pub fn dual_w1_estimate(
    mdp: &TabularGoalMdp,
    potential: &PotentialTable,
    goal: usize,
    visited: &[usize],
) -> Result<f64> {
    if visited.is_empty() {
        return Err(Error::EmptyBatch("dual_w1_estimate visitation batch"));
    }
    let top = potential.get(mdp, goal, goal)?;
    let mut acc = 0.0;
    for &s in visited {
        acc += potential.get(mdp, s, goal)?;
    }
    Ok(top - acc / visited.len() as f64)
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Policy updates so far.
    pub iterations: usize,
    pub env_steps: usize,
    pub success_rate: f64,
    pub mean_episode_length: f64,
    /// Mean over evaluated steps of `f(g,g) - f(s,g)`; `None` off the aim
    /// baseline or without evaluation steps.
    pub dual_w1: Option<f64>,
    /// Exact Wasserstein distance of the evaluated policy, averaged over
    /// sigma, when the model is small enough.
    pub oracle_w1: Option<f64>,
    pub lipschitz_max: Option<f64>,
    pub lipschitz_fraction: Option<f64>,
    pub visitation: Vec<u64>,
}

/// Training state for one `(mdp, config)` run.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    mdp: &'a TabularGoalMdp,
    config: TrainConfig,
    rng: SimRng,
    q: SoftQTable,
    potential: PotentialTable,
    reward: RewardSpec,
    agent_buffer: ReplayBuffer,
    potential_buffer: ReplayBuffer,
    iterations: usize,
    env_steps: usize,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(mdp: &'a TabularGoalMdp, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if config.baseline == Baseline::NegL2 && mdp.layout().is_none() {
            return Err(Error::Config {
                key: "baseline",
                reason: "neg_l2 needs a grid world".into(),
            });
        }
        let q = SoftQTable::new(mdp, config.alpha, config.lr)?;
        let potential = PotentialTable::new(mdp, config.lambda, config.potential_step_size)?;
        let reward = RewardSpec::new(config.reward_mode(), &potential, mdp.gamma());
        Ok(Trainer {
            mdp,
            rng: SimRng::seed_from_u64(config.seed),
            q,
            potential,
            reward,
            agent_buffer: ReplayBuffer::new(config.agent_buffer)?,
            potential_buffer: ReplayBuffer::new(config.potential_buffer)?,
            iterations: 0,
            env_steps: 0,
            epoch: 0,
            config,
        })
    }

    pub fn q(&self) -> &SoftQTable {
        &self.q
    }

    pub fn potential(&self) -> &PotentialTable {
        &self.potential
    }

    pub fn reward_spec(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn agent_buffer(&self) -> &ReplayBuffer {
        &self.agent_buffer
    }

    pub fn potential_buffer(&self) -> &ReplayBuffer {
        &self.potential_buffer
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    fn reward_for(&self, t: &TransitionRecord) -> Result<f64> {
        match self.config.baseline {
            Baseline::Aim => aim_reward(self.mdp, &self.potential, &self.reward, t),
            Baseline::Sparse => Ok(if t.goal_reached { 1.0 } else { 0.0 }),
            Baseline::NegL2 => {
                let layout = self.mdp.layout().expect("checked in Trainer::new");
                if t.s_next >= layout.n_cells() {
                    return Ok(0.0);
                }
                let (a, b) = (layout.cell(t.s_next), layout.cell(t.g));
                let dr = a.0 as f64 - b.0 as f64;
                let dc = a.1 as f64 - b.1 as f64;
                Ok(-libm::sqrt(dr * dr + dc * dc))
            }
        }
    }

    fn policy_update(&mut self) -> Result<()> {
        for _ in 0..self.config.policy_steps {
            let batch = self
                .agent_buffer
                .sample(self.config.agent_batch, &mut self.rng)?;
            let scored = batch
                .into_iter()
                .map(|t| self.reward_for(&t).map(|r| (t, r)))
                .collect::<Result<Vec<_>>>()?;
            self.q.td_update(self.mdp, &scored)?;
        }
        self.iterations += 1;
        Ok(())
    }

    fn potential_update(&mut self) -> Result<()> {
        if self.config.baseline != Baseline::Aim || self.config.potential_steps == 0 {
            return Ok(());
        }
        for _ in 0..self.config.potential_steps {
            let records = self
                .potential_buffer
                .sample(self.config.potential_batch, &mut self.rng)?;
            self.potential
                .update(self.mdp, &PotentialBatch::from_records(&records))?;
        }
        self.reward.refresh(&self.potential);
        Ok(())
    }

    fn store(&mut self, records: &[TransitionRecord]) {
        self.agent_buffer.extend(records.iter().copied());
        self.potential_buffer.extend(records.iter().copied());
    }

    fn end_episode(&mut self, episode: &[TransitionRecord]) -> Result<()> {
        if !self.config.use_her || episode.is_empty() {
            return Ok(());
        }
        let relabeled: Vec<TransitionRecord> =
            relabel_hindsight(episode, self.config.her_strategy, &mut self.rng)?
                .into_iter()
                .filter(|r| self.mdp.goal_slot(r.g).is_some())
                .collect();
        self.store(&relabeled);
        Ok(())
    }

    /// One epoch of interaction and learning followed by evaluation.
    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        let cfg = self.config.clone();
        let mut episode: Vec<TransitionRecord> = Vec::with_capacity(cfg.episode_cap);
        let mut task: Option<(usize, usize)> = None;
        let mut s = 0usize;
        for t in 0..cfg.steps_per_epoch {
            let (goal, slot) = match task {
                Some(task) => task,
                None => {
                    let (goal, start) = self.mdp.sample_task(&mut self.rng);
                    s = start;
                    episode.clear();
                    let slot = self.mdp.require_goal_slot(goal)?;
                    task = Some((goal, slot));
                    (goal, slot)
                }
            };
            let a = self.q.sample_action(s, slot, &mut self.rng);
            let (next, reached) = self.mdp.step(s, a, goal, &mut self.rng)?;
            let over = !reached && episode.len() + 1 >= cfg.episode_cap;
            let record = TransitionRecord::new(s, a, next, goal, over);
            episode.push(record);
            self.store(&[record]);
            self.env_steps += 1;
            if reached || over {
                self.end_episode(&episode)?;
                task = None;
            }
            if t % cfg.policy_update_period == 0 {
                self.policy_update()?;
            }
            if t % cfg.potential_update_period == 0 {
                self.potential_update()?;
            }
            s = next;
        }
        self.epoch += 1;
        self.epoch_metrics()
    }

    /// The policy evaluation rollouts follow.
    pub fn eval_policy(&self) -> Result<StochasticPolicy> {
        match self.config.eval_policy {
            EvalPolicy::Boltzmann => self.q.to_policy(self.mdp),
            EvalPolicy::Greedy => {
                let n = self.mdp.n_states();
                let mut actions = Vec::with_capacity(n * self.mdp.n_goals());
                for slot in 0..self.mdp.n_goals() {
                    actions.extend(self.q.greedy_actions(slot));
                }
                StochasticPolicy::deterministic(self.mdp, &actions)
            }
        }
    }

    fn epoch_metrics(&mut self) -> Result<EpochMetrics> {
        let policy = self.eval_policy()?;
        let eval_seed =
            self.config.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(self.epoch as u64));
        let eval = evaluate(
            self.mdp,
            &policy,
            self.config.eval_episodes,
            self.config.episode_cap,
            eval_seed,
        )?;

        let aim = self.config.baseline == Baseline::Aim;
        let dual_w1 = if aim && !eval.visited.is_empty() {
            let mut acc = 0.0;
            for &(s, g) in &eval.visited {
                acc += dual_w1_estimate(self.mdp, &self.potential, g, &[s])?;
            }
            Some(acc / eval.visited.len() as f64)
        } else {
            None
        };

        let oracle_w1 = if self.mdp.n_states() <= self.config.oracle_max_states {
            let mut total = 0.0;
            for (slot, &w) in self.mdp.sigma().iter().enumerate() {
                if w > 0.0 {
                    total +=
                        w * oracle::wasserstein_primal(self.mdp, &policy, self.mdp.goals()[slot])?;
                }
            }
            Some(total)
        } else {
            None
        };

        let (lipschitz_max, lipschitz_fraction) = if aim && !self.potential_buffer.is_empty() {
            let transitions: Vec<_> = self
                .potential_buffer
                .iter()
                .map(|r| (r.s, r.s_next, r.g))
                .collect();
            let (mx, frac) =
                potential::lipschitz_violation(self.mdp, &self.potential, &transitions)?;
            (Some(mx), Some(frac))
        } else {
            (None, None)
        };

        log::debug!(
            "epoch {} iterations {} success {:.3}",
            self.epoch,
            self.iterations,
            eval.success_rate
        );
        Ok(EpochMetrics {
            epoch: self.epoch,
            iterations: self.iterations,
            env_steps: self.env_steps,
            success_rate: eval.success_rate,
            mean_episode_length: eval.mean_episode_length,
            dual_w1,
            oracle_w1,
            lipschitz_max,
            lipschitz_fraction,
            visitation: eval.visitation,
        })
    }
}

/// Final state of a run alongside its metrics stream.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub epochs: Vec<EpochMetrics>,
    pub q: SoftQTable,
    pub potential: PotentialTable,
    pub reward: RewardSpec,
    pub potential_buffer: ReplayBuffer,
}

/// Train for `config.n_epochs` epochs, passing each epoch's metrics to
/// `on_epoch` as it completes.
pub fn run_with(
    mdp: &TabularGoalMdp,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<RunOutput> {
    let mut trainer = Trainer::new(mdp, config.clone())?;
    let mut epochs = Vec::with_capacity(config.n_epochs);
    for _ in 0..config.n_epochs {
        let m = trainer.run_epoch()?;
        on_epoch(&m);
        epochs.push(m);
    }
    Ok(RunOutput {
        epochs,
        q: trainer.q,
        potential: trainer.potential,
        reward: trainer.reward,
        potential_buffer: trainer.potential_buffer,
    })
}

pub fn run(mdp: &TabularGoalMdp, config: &TrainConfig) -> Result<RunOutput> {
    run_with(mdp, config, |_| {})
}
