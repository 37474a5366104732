use std::path::PathBuf;
use std::process::ExitCode;

use aimlab::commands::{cmd_oracle, cmd_relabel_dump, cmd_run, cmd_verify, Overrides};
use aimlab::config::load_experiment;
use aimlab::verify::Suite;
use aimlab::Failure;
use clap::{Args, Parser, Subcommand};

/// Train and inspect goal-reaching agents on tabular grid worlds.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write metrics and grids.
    Run(ExperimentArgs),
    /// Write the exact oracle report for the configured goal.
    Oracle(ExperimentArgs),
    /// Check the exact identities and print a pass/fail table.
    Verify,
    /// Train one seed and dump the replay buffer, one transition per line.
    RelabelDump(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Output directory, replacing `experiment.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds trained concurrently.
    #[arg(long)]
    parallel: Option<usize>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<aimlab::config::ExperimentConfig, Failure> {
        let cfg = load_experiment(&self.config).map_err(Failure::Config)?;
        Overrides {
            seed: self.seed_override,
            out: self.out.clone(),
            parallel: self.parallel,
        }
        .apply(cfg)
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let summary = cmd_run(&cfg)?;
            println!(
                "{} seeds, {} iterations, final median success {:.3}; outputs in {}",
                summary.seeds.len(),
                summary.iterations,
                summary.final_median_success,
                cfg.output_dir.display()
            );
        }
        Command::Oracle(args) => {
            let cfg = args.load()?;
            let record = cmd_oracle(&cfg)?;
            println!(
                "w1 primal {:?}, analytic {:?}, start distance {:?}; report in {}",
                record.w1_primal.0,
                record.w1_analytic.0,
                record.start_distance.0,
                cfg.output_dir.display()
            );
        }
        Command::Verify => cmd_verify(&Suite::default())?,
        Command::RelabelDump(args) => {
            let cfg = args.load()?;
            let n = cmd_relabel_dump(&cfg)?;
            println!(
                "{n} transitions written to {}",
                cfg.output_dir.join("buffer.jsonl").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AIMLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aimlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
