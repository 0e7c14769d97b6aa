//! `combnet`: batch driver for relay-network coded caching experiments.

mod config;
mod run;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Mode};
use run::{run_experiment, verify_plan, Failure};

#[derive(Parser)]
#[command(name = "combnet", version, about = "Coded caching load experiments on relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Centralized placement on a combination network.
    Combination(RunArgs),
    /// Centralized placement on an arbitrary relay network.
    General(RunArgs),
    /// Random decentralized placement.
    Decentralized(RunArgs),
    /// Relay caches plus user caches on a combination network.
    Hybrid(RunArgs),
    /// Re-check a dumped plan against a dumped placement.
    VerifyPlan(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rebalance: bool,
    #[arg(long)]
    no_verify: bool,
    /// Bit-level simulation at this file length.
    #[arg(long = "concrete-B")]
    concrete_b: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    placement: PathBuf,
    #[arg(long = "concrete-B")]
    concrete_b: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run_command(args: RunArgs, mode: Mode) -> Result<(), Failure> {
    let mut config = ExperimentConfig::load(&args.config, mode)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.rebalance |= args.rebalance;
    if args.no_verify {
        config.verify = false;
    }
    if args.concrete_b.is_some() {
        config.concrete_bits = args.concrete_b;
    }
    let mut log = io::stderr().lock();
    match &args.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|source| config::ConfigError::Io { path: path.clone(), source })?;
            let mut out = BufWriter::new(file);
            run_experiment(&config, &mut out, &mut log)?;
            out.flush().map_err(|source| config::ConfigError::Io { path: path.clone(), source })?;
        }
        None => run_experiment(&config, &mut io::stdout().lock(), &mut log)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Combination(a) => run_command(a, Mode::Centralized),
        Command::General(a) => run_command(a, Mode::General),
        Command::Decentralized(a) => run_command(a, Mode::Decentralized),
        Command::Hybrid(a) => run_command(a, Mode::Hybrid),
        Command::VerifyPlan(a) => verify_plan(&a.plan, &a.placement, a.concrete_b, a.seed, &mut io::stderr().lock()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
