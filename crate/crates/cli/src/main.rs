use std::path::PathBuf;
use std::process::ExitCode;

use aster_core::experiment::{Experiment, ExperimentError};
use clap::{Args, Parser, Subcommand};

/// Spiking-transformer accelerator experiments.
#[derive(Parser)]
#[command(name = "aster", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-layer firing rates over the calibration set (profile.csv).
    Profile(Common),
    /// Pruned inference at the configured thresholds: exit records and energy report.
    Infer(Common),
    /// Threshold search; resumes from an existing campaign.jsonl.
    Optimize(Common),
    /// Summary tables and SVG plots.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, ExperimentError> {
    let (args, step): (&Common, fn(&mut Experiment) -> Result<Vec<PathBuf>, ExperimentError>) = match &cli.command {
        Command::Profile(a) => (a, Experiment::run_profile),
        Command::Infer(a) => (a, Experiment::run_infer),
        Command::Optimize(a) => (a, Experiment::run_optimize),
        Command::Report(a) => (a, Experiment::run_report),
    };
    let mut exp = Experiment::from_file(&args.config, args.seed, args.out.clone())?;
    step(&mut exp)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("aster: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
