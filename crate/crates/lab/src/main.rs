use std::path::PathBuf;
use std::process::ExitCode;

use atlas_lab::{execute, Command, ExperimentKind, Invocation, Outcome};
use clap::{Args, Parser, Subcommand};

/// Monte Carlo experiments for Atlas-type ranked particle systems.
#[derive(Debug, Parser)]
#[command(name = "atlas-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensemble members (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: runs/<kind>-seed<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Time-averaged gap means against the stationary targets.
    Stationarity(Common),
    /// Synchronous coupling of two initial conditions.
    Coupling(Common),
    /// Excursion detection on coupled runs.
    Excursions(Common),
    /// Occupancy-measure KS distances along a time grid.
    Doa(Common),
    /// Monte Carlo check of the Gaussian tail bounds.
    Bounds(Common),
    /// Stationarity of the alternative finite model.
    AltModel(Common),
    /// Compares truncation m with 2m on the monitored gaps.
    DoublingCheck(Common),
    /// Resolves and prints the config without running it.
    ValidateConfig(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Stationarity(c) => (Command::Run(ExperimentKind::Stationarity), c),
        Sub::Coupling(c) => (Command::Run(ExperimentKind::Coupling), c),
        Sub::Excursions(c) => (Command::Run(ExperimentKind::Excursions), c),
        Sub::Doa(c) => (Command::Run(ExperimentKind::Doa), c),
        Sub::Bounds(c) => (Command::Run(ExperimentKind::Bounds), c),
        Sub::AltModel(c) => (Command::Run(ExperimentKind::AltModel), c),
        Sub::DoublingCheck(c) => (Command::DoublingCheck, c),
        Sub::ValidateConfig(c) => (Command::ValidateConfig, c),
    };
    let inv = Invocation { command, config: common.config, seed: common.seed, workers: common.workers, out: common.out };
    match execute(&inv) {
        Ok(Outcome::Validated(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Outcome::Written(dir)) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("atlas-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
