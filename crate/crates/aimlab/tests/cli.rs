use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aimlab::grid_csv::read_grid;
use aimlab::records::{
    read_buffer_dump, read_json, read_jsonl, AggregateRecord, MetricsRecord, OracleRecord,
    RunSummary,
};
use tempfile::{tempdir, TempDir};

fn aimlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aimlab"))
        .args(args)
        .env_remove("AIMLAB_LOG")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("exp.toml");
    fs::write(&path, body).unwrap();
    path
}

fn small_run(env: &str, seeds: &str) -> String {
    format!(
        "[experiment]\nenv = \"{env}\"\nseeds = {seeds}\noutput_dir = \"unused\"\n\n\
         [trainer]\nn_epochs = 2\nsteps_per_epoch = 400\neval_episodes = 20\n"
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_grids_metrics_and_aggregate() {
    let dir = tempdir().unwrap();
    let cfg = write_config(&dir, &small_run("room", "[0, 1, 2]"));
    let out = dir.path().join("out");
    let res = aimlab(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--parallel",
        "3",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );

    for name in ["visitation.csv", "reward_grid.csv"] {
        let cells = read_grid(&out.join(name)).unwrap();
        assert_eq!(cells.len(), 100, "{name}");
    }
    let aggregate: Vec<AggregateRecord> = read_jsonl(&out.join("aggregate.jsonl")).unwrap();
    assert_eq!(aggregate.len(), 2);
    assert_eq!(aggregate[1].seeds, vec![0, 1, 2]);
    assert_eq!(aggregate[1].success.len(), 3);

    for seed in 0..3 {
        let seed_dir = out.join(format!("seed-{seed}"));
        let metrics: Vec<MetricsRecord> = read_jsonl(&seed_dir.join("metrics.jsonl")).unwrap();
        assert_eq!(metrics.len(), 2);
        assert!(metrics
            .iter()
            .all(|m| m.seed == seed && (0.0..=1.0).contains(&m.success_rate)));
        // visitation counts add up to the evaluated steps
        let visits: f64 = read_grid(&seed_dir.join("visitation.csv"))
            .unwrap()
            .iter()
            .map(|c| c.value)
            .sum();
        let steps = metrics[1].mean_episode_length * 20.0;
        assert!((visits - steps).abs() < 1e-6, "{visits} vs {steps}");
        assert_eq!(aggregate[1].success[seed as usize], metrics[1].success_rate);
        assert!(seed_dir.join("policy.json").is_file());
    }
    let summary: RunSummary = read_json(&out.join("summary.json")).unwrap();
    assert_eq!((summary.epochs, summary.iterations), (2, 20));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempdir().unwrap();
    let cfg = write_config(&dir, &small_run("windy", "[4, 5]"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(aimlab(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&a),
        "--parallel",
        "2"
    ])
    .status
    .success());
    assert!(aimlab(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&b),
        "--parallel",
        "1"
    ])
    .status
    .success());
    for rel in [
        "aggregate.jsonl",
        "summary.json",
        "visitation.csv",
        "reward_grid.csv",
        "seed-4/metrics.jsonl",
        "seed-5/q_table.json",
        "seed-5/potential.csv",
    ] {
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn seed_override_runs_one_seed() {
    let dir = tempdir().unwrap();
    let cfg = write_config(&dir, &small_run("toroidal", "[0, 1]"));
    let out = dir.path().join("out");
    assert!(aimlab(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--seed-override",
        "7"
    ])
    .status
    .success());
    assert!(out.join("seed-7").is_dir());
    assert!(!out.join("seed-0").exists());
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempdir().unwrap();
    let cfg = write_config(
        &dir,
        &small_run("room", "[0]").replace("n_epochs", "n_epoch"),
    );
    let res = aimlab(&["run", "--config", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("n_epoch"));

    let cfg = write_config(&dir, &small_run("lab", "[0]"));
    let res = aimlab(&["oracle", "--config", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("env = \"lab\""));

    assert_eq!(
        aimlab(&["run", "--config", s(&dir.path().join("absent.toml"))])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(aimlab(&["run"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempdir().unwrap();
    let cfg = write_config(&dir, &small_run("room", "[0]"));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let res = aimlab(&["run", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn oracle_reports_grid_distances() {
    let dir = tempdir().unwrap();
    let cfg = write_config(&dir, &small_run("toroidal", "[0]"));
    let out = dir.path().join("torus");
    assert!(aimlab(&["oracle", "--config", s(&cfg), "--out", s(&out)])
        .status
        .success());
    let d = read_grid(&out.join("optimal_distance.csv")).unwrap();
    let at = |r, c| d.iter().find(|x| x.row == r && x.col == c).unwrap().value;
    assert_eq!(at(2, 2), 10.0);
    assert_eq!(at(7, 7), 0.0);

    let cfg = write_config(&dir, &small_run("room", "[0]"));
    let out = dir.path().join("room");
    assert!(aimlab(&["oracle", "--config", s(&cfg), "--out", s(&out)])
        .status
        .success());
    let report: OracleRecord = read_json(&out.join("oracle_report.json")).unwrap();
    assert!((report.w1_primal.0 - report.w1_analytic.0).abs() < 1e-8);
    assert_eq!(report.start_distance.0, 18.0);
    assert_eq!(report.optimal_distance[77].0, 0.0);
}

#[test]
fn oracle_reads_a_trained_policy() {
    let dir = tempdir().unwrap();
    let cfg = write_config(&dir, &small_run("room", "[0]"));
    let run_out = dir.path().join("run");
    assert!(aimlab(&["run", "--config", s(&cfg), "--out", s(&run_out)])
        .status
        .success());
    let body = format!(
        "{}\n[oracle]\npolicy = \"run/seed-0/policy.json\"\n",
        small_run("room", "[0]")
    );
    let cfg = write_config(&dir, &body);
    let out = dir.path().join("oracle");
    let res = aimlab(&["oracle", "--config", s(&cfg), "--out", s(&out)]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: OracleRecord = read_json(&out.join("oracle_report.json")).unwrap();
    assert!(report.policy.ends_with("policy.json"));
    // a stochastic policy is never better than the optimal distance
    assert!(report.start_distance.0 >= 18.0);
}

#[test]
fn unreachable_goal_reports_infinity() {
    let dir = tempdir().unwrap();
    fs::write(
        dir.path().join("split.toml"),
        "width = 4\nheight = 1\nstart_cell = [0, 0]\ngoal_cell = [0, 3]\n\
         walls = [{ from = [0, 1], to = [0, 2] }, { from = [0, 2], to = [0, 1] }]\n",
    )
    .unwrap();
    let cfg = write_config(
        &dir,
        "[experiment]\nenv = \"custom\"\ngrid_spec = \"split.toml\"\nseeds = [0]\noutput_dir = \"o\"\n",
    );
    let out = dir.path().join("o");
    let res = aimlab(&["oracle", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: OracleRecord = read_json(&out.join("oracle_report.json")).unwrap();
    assert_eq!(report.start_distance.0, f64::INFINITY);
    assert_eq!(report.w1_primal.0, f64::INFINITY);
    let text = fs::read_to_string(out.join("oracle_report.json")).unwrap();
    assert!(text.contains("\"inf\""));
    let d = read_grid(&out.join("optimal_distance.csv")).unwrap();
    assert_eq!(
        d.iter().map(|c| c.value).collect::<Vec<_>>(),
        vec![f64::INFINITY, f64::INFINITY, 1.0, 0.0]
    );
}

#[test]
fn verify_passes() {
    let res = aimlab(&["verify"]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(res.status.success(), "{stdout}");
    assert!(stdout.contains("0 failed"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn relabel_dump_writes_one_transition_per_line() {
    let dir = tempdir().unwrap();
    let body = small_run("room", "[0]").replace("n_epochs = 2", "n_epochs = 1\nuse_her = true");
    let cfg = write_config(&dir, &body);
    let out = dir.path().join("dump");
    assert!(
        aimlab(&["relabel-dump", "--config", s(&cfg), "--out", s(&out)])
            .status
            .success()
    );
    let text = fs::read_to_string(out.join("buffer.jsonl")).unwrap();
    let records = read_buffer_dump(&out.join("buffer.jsonl")).unwrap();
    assert_eq!(records.len(), text.lines().count());
    assert!(records.iter().any(|r| r.g != 77));
    assert!(records.iter().all(|r| r.goal_reached == (r.s_next == r.g)));
}
