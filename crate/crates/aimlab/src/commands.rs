//! The four subcommands, independent of argument parsing.

use std::fs;
use std::path::{Path, PathBuf};

use aimlab_core::mdp::GridLayout;
use aimlab_core::oracle::{optimal_distance, optimal_policy, oracle_report};
use aimlab_core::potential::aim_reward;
use aimlab_core::trainer::{run, RunOutput};
use aimlab_core::{Baseline, StochasticPolicy, TabularGoalMdp, TrainConfig, TransitionRecord};
use anyhow::{anyhow, Context};
use rayon::prelude::*;

use crate::config::{EnvName, ExperimentConfig};
use crate::grid_csv::write_grid;
use crate::records::{
    read_json, write_buffer_dump, write_json, write_jsonl, AggregateRecord, MetricsRecord,
    OracleRecord, RunSummary,
};
use crate::verify::{render_table, run_checks, Suite};
use crate::Failure;

/// Command-line adjustments applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub parallel: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(p) = self.parallel {
            if p == 0 {
                return Err(Failure::Config(anyhow!("--parallel: must be at least 1")));
            }
            cfg.parallel = p;
        }
        Ok(cfg)
    }
}

fn env_label(env: EnvName) -> &'static str {
    match env {
        EnvName::Room => "room",
        EnvName::Windy => "windy",
        EnvName::Toroidal => "toroidal",
        EnvName::Custom => "custom",
    }
}

fn baseline_label(b: Baseline) -> &'static str {
    match b {
        Baseline::Aim => "aim",
        Baseline::Sparse => "sparse",
        Baseline::NegL2 => "neg_l2",
    }
}

fn build(cfg: &ExperimentConfig) -> Result<(TabularGoalMdp, GridLayout), Failure> {
    let mdp = cfg.grid.build().map_err(|e| Failure::Config(e.into()))?;
    let layout = *mdp.layout().expect("grid models carry a layout");
    Ok((mdp, layout))
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Reward for entering each state under the run's reward definition.
fn reward_grid(
    mdp: &TabularGoalMdp,
    config: &TrainConfig,
    out: &RunOutput,
    goal: usize,
) -> anyhow::Result<Vec<f64>> {
    let layout = mdp.layout().expect("grid model");
    let (gr, gc) = layout.cell(goal);
    (0..layout.n_cells())
        .map(|s| {
            let entering = TransitionRecord::new(s, 0, s, goal, false);
            Ok(match config.baseline {
                Baseline::Aim => aim_reward(mdp, &out.potential, &out.reward, &entering)?,
                Baseline::Sparse => f64::from(u8::from(s == goal)),
                Baseline::NegL2 => {
                    let (r, c) = layout.cell(s);
                    -((r as f64 - gr as f64).powi(2) + (c as f64 - gc as f64).powi(2)).sqrt()
                }
            })
        })
        .collect()
}

struct SeedResult {
    seed: u64,
    success: Vec<f64>,
    iterations: Vec<usize>,
    visitation: Vec<f64>,
    reward: Vec<f64>,
}

fn run_seed(
    cfg: &ExperimentConfig,
    mdp: &TabularGoalMdp,
    layout: &GridLayout,
    seed: u64,
) -> anyhow::Result<SeedResult> {
    let config = TrainConfig {
        seed,
        ..cfg.trainer.clone()
    };
    log::info!("seed {seed}: training {} epochs", config.n_epochs);
    let out = run(mdp, &config).with_context(|| format!("seed {seed}"))?;
    let goal = cfg.grid.goal_state();
    let dir = cfg.output_dir.join(format!("seed-{seed}"));
    create_dir(&dir)?;

    write_jsonl(
        &dir.join("metrics.jsonl"),
        out.epochs.iter().map(|m| MetricsRecord::new(seed, m)),
    )?;
    let visitation: Vec<f64> = out
        .epochs
        .last()
        .map(|m| m.visitation.iter().map(|&c| c as f64).collect())
        .unwrap_or_else(|| vec![0.0; mdp.n_states()]);
    write_grid(&dir.join("visitation.csv"), layout, &visitation)?;
    let reward = reward_grid(mdp, &config, &out, goal)?;
    write_grid(&dir.join("reward_grid.csv"), layout, &reward)?;
    let potential: Vec<f64> = (0..layout.n_cells())
        .map(|s| out.potential.get(mdp, s, goal))
        .collect::<Result<_, _>>()?;
    write_grid(&dir.join("potential.csv"), layout, &potential)?;
    write_json(&dir.join("policy.json"), &out.q.to_policy(mdp)?)?;
    write_json(&dir.join("q_table.json"), &out.q)?;
    write_json(&dir.join("potential_table.json"), &out.potential)?;

    Ok(SeedResult {
        seed,
        success: out.epochs.iter().map(|m| m.success_rate).collect(),
        iterations: out.epochs.iter().map(|m| m.iterations).collect(),
        visitation,
        reward,
    })
}

fn pool(parallel: usize) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .context("cannot start worker threads")
}

/// Train every seed and write per-seed outputs plus the aggregate files.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary, Failure> {
    let (mdp, layout) = build(cfg)?;
    create_dir(&cfg.output_dir)?;
    let results: Vec<SeedResult> = pool(cfg.parallel)?.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, &mdp, &layout, seed))
            .collect::<anyhow::Result<_>>()
    })?;

    let epochs = cfg.trainer.n_epochs;
    let aggregate: Vec<AggregateRecord> = (0..epochs)
        .map(|e| {
            let success: Vec<f64> = results.iter().map(|r| r.success[e]).collect();
            AggregateRecord {
                epoch: e + 1,
                iterations: results[0].iterations[e],
                median_success: median(&success),
                success,
                seeds: cfg.seeds.clone(),
            }
        })
        .collect();
    write_jsonl(&cfg.output_dir.join("aggregate.jsonl"), &aggregate)?;

    // visitation summed over seeds, reward as the per-cell median
    let n = layout.n_cells();
    let visitation: Vec<f64> = (0..n)
        .map(|s| results.iter().map(|r| r.visitation[s]).sum())
        .collect();
    write_grid(&cfg.output_dir.join("visitation.csv"), &layout, &visitation)?;
    let reward: Vec<f64> = (0..n)
        .map(|s| median(&results.iter().map(|r| r.reward[s]).collect::<Vec<_>>()))
        .collect();
    write_grid(&cfg.output_dir.join("reward_grid.csv"), &layout, &reward)?;

    let final_success: Vec<f64> = results
        .iter()
        .map(|r| r.success.last().copied().unwrap_or(0.0))
        .collect();
    let summary = RunSummary {
        env: env_label(cfg.env).into(),
        baseline: baseline_label(cfg.trainer.baseline).into(),
        seeds: results.iter().map(|r| r.seed).collect(),
        epochs,
        iterations: results[0].iterations.last().copied().unwrap_or(0),
        final_median_success: median(&final_success),
        final_success,
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Exact report for the configured goal under the optimal or a stored policy.
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<OracleRecord, Failure> {
    let (mdp, layout) = build(cfg)?;
    let (policy, label) = match &cfg.oracle_policy {
        None => (
            optimal_policy(&mdp).map_err(anyhow::Error::from)?,
            "optimal".to_string(),
        ),
        Some(path) => {
            let stored: StochasticPolicy = read_json(path).map_err(Failure::Config)?;
            // re-validate against this model's shape
            let policy = StochasticPolicy::new(&mdp, stored.probs().to_vec())
                .map_err(|e| Failure::Config(anyhow!("oracle.policy: {e}")))?;
            (policy, path.display().to_string())
        }
    };
    let goal = cfg.grid.goal_state();
    let report = oracle_report(&mdp, &policy, goal).map_err(anyhow::Error::from)?;
    let d_opt = optimal_distance(&mdp, goal).map_err(anyhow::Error::from)?;
    create_dir(&cfg.output_dir)?;
    let record = OracleRecord::new(
        env_label(cfg.env).into(),
        label,
        cfg.grid.goal_cell,
        cfg.grid.start_state(),
        &report,
        &d_opt,
    );
    write_json(&cfg.output_dir.join("oracle_report.json"), &record)?;
    write_grid(
        &cfg.output_dir.join("optimal_distance.csv"),
        &layout,
        &d_opt,
    )?;
    write_grid(
        &cfg.output_dir.join("hitting_time.csv"),
        &layout,
        &report.d_t,
    )?;
    Ok(record)
}

/// Run the identity checks, print the table, and fail on any failed check.
pub fn cmd_verify(suite: &Suite) -> Result<(), Failure> {
    let results = run_checks(suite);
    print!("{}", render_table(&results));
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Property(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

/// Train the first seed and dump the potential buffer, relabeled copies
/// included, to `buffer.jsonl`. Returns the number of transitions written.
pub fn cmd_relabel_dump(cfg: &ExperimentConfig) -> Result<usize, Failure> {
    let (mdp, _) = build(cfg)?;
    let config = TrainConfig {
        seed: cfg.seeds[0],
        ..cfg.trainer.clone()
    };
    let out = run(&mdp, &config).map_err(anyhow::Error::from)?;
    create_dir(&cfg.output_dir)?;
    write_buffer_dump(
        &cfg.output_dir.join("buffer.jsonl"),
        out.potential_buffer.iter(),
    )?;
    Ok(out.potential_buffer.len())
}
