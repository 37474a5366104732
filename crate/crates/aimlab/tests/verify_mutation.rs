use aimlab::commands::cmd_verify;
use aimlab::verify::{run_checks, Suite};
use aimlab_core::oracle::wasserstein_analytic;
use aimlab_core::{StochasticPolicy, TabularGoalMdp};

fn flipped_analytic(
    mdp: &TabularGoalMdp,
    pi: &StochasticPolicy,
    goal: usize,
) -> aimlab_core::Result<f64> {
    wasserstein_analytic(mdp, pi, goal).map(|w| -w)
}

#[test]
fn default_suite_passes() {
    let results = run_checks(&Suite::default());
    assert!(results.iter().all(|r| r.pass), "{results:?}");
    assert!(cmd_verify(&Suite::default()).is_ok());
}

#[test]
fn sign_error_in_analytic_w1_is_caught() {
    let suite = Suite {
        analytic_w1: flipped_analytic,
    };
    let failed: Vec<&str> = run_checks(&suite)
        .into_iter()
        .filter(|r| !r.pass)
        .map(|r| r.name)
        .collect();
    assert!(failed.contains(&"W1 primal = analytic"), "{failed:?}");
    let err = cmd_verify(&suite).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
