//! Experiment configuration files.
//!
//! An experiment is a TOML file with an `[experiment]` section and optional
//! `[trainer]` and `[oracle]` sections:
//!
//! ```toml
//! [experiment]
//! env = "room"            # room | windy | toroidal | custom
//! # grid_spec = "maze.toml"  (required for env = "custom")
//! seeds = [0, 1, 2]
//! output_dir = "out/room"
//!
//! [trainer]
//! n_epochs = 4
//! baseline = "aim"
//!
//! [oracle]
//! # policy = "out/room/seed-0/policy.json"  (default: the optimal policy)
//! ```
//!
//! Input paths (`grid_spec`, `oracle.policy`) are resolved against the
//! config file's directory. `output_dir` is taken as written.

use std::fs;
use std::path::{Path, PathBuf};

use aimlab_core::{GridSpec, TrainConfig};
use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Room,
    Windy,
    Toroidal,
    Custom,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    env: EnvName,
    grid_spec: Option<PathBuf>,
    seeds: Vec<u64>,
    output_dir: PathBuf,
    #[serde(default = "one")]
    parallel: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleSection {
    policy: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentSection,
    #[serde(default)]
    trainer: TrainConfig,
    #[serde(default)]
    oracle: OracleSection,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvName,
    pub grid: GridSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub parallel: usize,
    /// Per-run settings; `seed` is overwritten from `seeds` for each run.
    pub trainer: TrainConfig,
    /// Policy snapshot for the oracle command; `None` means the optimal policy.
    pub oracle_policy: Option<PathBuf>,
}

/// Read and validate an experiment file. Every error here is a config error.
pub fn load_experiment(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_experiment(&text, base).with_context(|| format!("in config {}", path.display()))
}

/// Parse experiment text, resolving relative input paths against `base`.
pub fn parse_experiment(text: &str, base: &Path) -> anyhow::Result<ExperimentConfig> {
    let raw: toml::Table = toml::from_str(text)?;
    let sets_seed = raw
        .get("trainer")
        .and_then(|t| t.as_table())
        .is_some_and(|t| t.contains_key("seed"));
    if sets_seed {
        bail!("trainer.seed: seeds are set by experiment.seeds");
    }
    let file: ConfigFile = toml::from_str(text)?;
    let ConfigFile {
        experiment: exp,
        trainer,
        oracle,
    } = file;

    if exp.seeds.is_empty() {
        bail!("experiment.seeds: needs at least one seed");
    }
    if exp.parallel == 0 {
        bail!("experiment.parallel: must be at least 1");
    }
    let grid = match (exp.env, &exp.grid_spec) {
        (EnvName::Room, None) => GridSpec::room(),
        (EnvName::Windy, None) => GridSpec::windy(),
        (EnvName::Toroidal, None) => GridSpec::toroidal(),
        (EnvName::Custom, Some(p)) => {
            load_grid_spec(&base.join(p)).context("experiment.grid_spec")?
        }
        (EnvName::Custom, None) => bail!("experiment.grid_spec: required when env = \"custom\""),
        (_, Some(_)) => bail!("experiment.grid_spec: only allowed when env = \"custom\""),
    };
    trainer.validate().map_err(|e| {
        anyhow!(
            "trainer.{}",
            e.to_string().trim_start_matches("invalid configuration: ")
        )
    })?;
    let oracle_policy = match oracle.policy {
        Some(p) => {
            let p = base.join(p);
            if !p.is_file() {
                bail!("oracle.policy: {} does not exist", p.display());
            }
            Some(p)
        }
        None => None,
    };
    Ok(ExperimentConfig {
        env: exp.env,
        grid,
        seeds: exp.seeds,
        output_dir: exp.output_dir,
        parallel: exp.parallel,
        trainer,
        oracle_policy,
    })
}

/// Read a grid description (the `GridSpec` fields as TOML keys) and check
/// that it compiles.
pub fn load_grid_spec(path: &Path) -> anyhow::Result<GridSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read grid spec {}", path.display()))?;
    let spec: GridSpec =
        toml::from_str(&text).with_context(|| format!("in grid spec {}", path.display()))?;
    spec.build()
        .with_context(|| format!("in grid spec {}", path.display()))?;
    Ok(spec)
}
