//! Exact identity checks behind the `verify` command.

use std::fmt::Write as _;
use std::time::Instant;

use aimlab_core::instances::{
    random_deterministic_policy, random_mdp, random_policy, InstanceShape,
};
use aimlab_core::oracle::{
    arrival_value, enumerate_optimal_policies, geometric_sum_identity, h, hitting_time_metric,
    hitting_time_variance, jensen_gap, optimal_distance, optimal_policy, wasserstein_analytic,
    wasserstein_primal, ENUMERATION_LIMIT,
};
use aimlab_core::{GridSpec, SimRng, StochasticPolicy, TabularGoalMdp};

pub type AnalyticW1 = fn(&TabularGoalMdp, &StochasticPolicy, usize) -> aimlab_core::Result<f64>;

/// The functions under test. Swapping one out lets a test confirm the
/// checks catch a broken implementation.
#[derive(Debug, Clone, Copy)]
pub struct Suite {
    pub analytic_w1: AnalyticW1,
}

impl Default for Suite {
    fn default() -> Self {
        Suite {
            analytic_w1: wasserstein_analytic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(
    name: &'static str,
    f: impl FnOnce() -> aimlab_core::Result<(bool, String)>,
) -> CheckResult {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok((pass, detail)) => (pass, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    log::info!("{name}: {:.2?}", start.elapsed());
    CheckResult { name, pass, detail }
}

fn instances(
    count: usize,
    deterministic: bool,
    seed: u64,
) -> aimlab_core::Result<Vec<(TabularGoalMdp, SimRng)>> {
    let gammas = [0.5, 0.9, 0.99];
    let mut meta = SimRng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let shape = InstanceShape {
                n_regular: 2 + meta.below(14),
                n_actions: 1 + meta.below(4),
                max_successors: if deterministic { 1 } else { 1 + meta.below(3) },
                gamma: gammas[i % gammas.len()],
            };
            let mut rng = meta.fork();
            Ok((random_mdp(shape, &mut rng)?, rng))
        })
        .collect()
}

fn corner_grid() -> GridSpec {
    GridSpec {
        width: 3,
        height: 3,
        walls: Vec::new(),
        wrap: false,
        wind_columns: Vec::new(),
        wind_up_success: 0.6,
        wind_side_slip: 0.4,
        start_cell: (0, 0),
        goal_cell: (2, 2),
        gamma: 0.99,
    }
}

pub fn run_checks(suite: &Suite) -> Vec<CheckResult> {
    vec![
        check("geometric-sum identity", || {
            let mut worst: f64 = 0.0;
            let gammas = (1..=19).map(|k| k as f64 * 0.05).chain([0.99]);
            for gamma in gammas {
                for t in 1..=50 {
                    let (lhs, rhs) = geometric_sum_identity(t, gamma)?;
                    worst = worst.max((lhs - rhs).abs());
                }
            }
            Ok((worst < 1e-9, format!("max gap {worst:.1e}")))
        }),
        check("h strictly increasing", || {
            let mut ok = true;
            for gamma in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
                for i in 0..=500 {
                    let mu = i as f64 * 0.1;
                    for delta in [1e-3, 1.0] {
                        ok &= h(mu + delta, gamma) > h(mu, gamma);
                    }
                }
            }
            Ok((ok, "6 gammas x 501 points x 2 steps".into()))
        }),
        check("W1 primal = analytic", || {
            let mut worst: f64 = 0.0;
            for (mdp, mut rng) in instances(50, false, 31)? {
                let pi = random_policy(&mdp, &mut rng)?;
                let g = mdp.goals()[0];
                let primal = wasserstein_primal(&mdp, &pi, g)?;
                let analytic = (suite.analytic_w1)(&mdp, &pi, g)?;
                worst = worst.max((primal - analytic).abs() / primal.max(1.0));
            }
            Ok((
                worst < 1e-8,
                format!("max relative gap {worst:.1e} on 50 instances"),
            ))
        }),
        check("value >= gamma^d", || {
            let mut worst = f64::INFINITY;
            for (mdp, mut rng) in instances(100, false, 32)? {
                let pi = random_policy(&mdp, &mut rng)?;
                let g = mdp.goals()[0];
                let d = hitting_time_metric(&mdp, &pi, g)?;
                let v = arrival_value(&mdp, &pi, g)?;
                for s in (0..d.len()).filter(|&s| d[s].is_finite()) {
                    worst = worst.min(v[s] - mdp.gamma().powf(d[s]));
                }
            }
            Ok((
                worst >= -1e-10,
                format!("min V - gamma^d {worst:.1e} on 100 instances"),
            ))
        }),
        check("deterministic: value = gamma^d", || {
            let mut worst: f64 = 0.0;
            let mut same_sets = true;
            for (mdp, mut rng) in instances(50, true, 33)? {
                let pi = random_deterministic_policy(&mdp, &mut rng)?;
                let g = mdp.goals()[0];
                let d = hitting_time_metric(&mdp, &pi, g)?;
                let v = arrival_value(&mdp, &pi, g)?;
                for s in (0..d.len()).filter(|&s| d[s].is_finite()) {
                    worst = worst.max((v[s] - mdp.gamma().powf(d[s])).abs());
                }
                if mdp
                    .n_actions()
                    .checked_pow(mdp.n_states() as u32)
                    .is_some_and(|n| n <= 1 << 16)
                {
                    let sets = enumerate_optimal_policies(&mdp, g, ENUMERATION_LIMIT)?;
                    same_sets &= sets.argmin_w1 == sets.argmax_return;
                }
            }
            Ok((
                worst < 1e-10 && same_sets,
                format!("max gap {worst:.1e}, optimal sets agree: {same_sets}"),
            ))
        }),
        check("Jensen gap = 0 iff Var(T) = 0", || {
            let mut mismatches = 0;
            for (i, (mdp, mut rng)) in instances(60, false, 34)?.into_iter().enumerate() {
                let pi = if i % 2 == 0 {
                    random_deterministic_policy(&mdp, &mut rng)?
                } else {
                    random_policy(&mdp, &mut rng)?
                };
                let g = mdp.goals()[0];
                let d = hitting_time_metric(&mdp, &pi, g)?;
                let gap = jensen_gap(&arrival_value(&mdp, &pi, g)?, &d, mdp.gamma());
                let var = hitting_time_variance(&mdp, &pi, g)?;
                for s in (0..d.len()).filter(|&s| d[s].is_finite()) {
                    if (gap[s].abs() < 1e-10) != (var[s] < 1e-9) {
                        mismatches += 1;
                    }
                }
            }
            Ok((mismatches == 0, format!("{mismatches} mismatching states")))
        }),
        check("3x3 grid: argmin W1 = argmax return", || {
            let spec = corner_grid();
            let mdp = spec.build()?;
            let sets = enumerate_optimal_policies(&mdp, spec.goal_state(), ENUMERATION_LIMIT)?;
            let same = sets.argmin_w1 == sets.argmax_return && !sets.argmin_w1.is_empty();
            Ok((
                same,
                format!("{} policies in each optimal set", sets.argmin_w1.len()),
            ))
        }),
        check("grid distances and optimal-policy W1", || {
            let room = GridSpec::room();
            let torus = GridSpec::toroidal();
            let (room_mdp, torus_mdp) = (room.build()?, torus.build()?);
            let d_room = optimal_distance(&room_mdp, room.goal_state())?[room.start_state()];
            let d_torus = optimal_distance(&torus_mdp, torus.goal_state())?[torus.start_state()];
            let pi = optimal_policy(&room_mdp)?;
            let primal = wasserstein_primal(&room_mdp, &pi, room.goal_state())?;
            let analytic = (suite.analytic_w1)(&room_mdp, &pi, room.goal_state())?;
            let agree = (primal - analytic).abs() < 1e-8;
            Ok((
                d_room == 18.0 && d_torus == 10.0 && agree,
                format!("room start {d_room}, torus start {d_torus}, room W1 {primal:.6} vs {analytic:.6}"),
            ))
        }),
    ]
}

/// Fixed-width pass/fail table.
pub fn render_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{:width$}  {status}  {}", r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    let _ = writeln!(out, "{} checks, {failed} failed", results.len());
    out
}
