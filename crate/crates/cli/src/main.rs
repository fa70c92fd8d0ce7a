use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcaerr_cli::{run, Command, Invocation};

#[derive(Parser)]
#[command(
    name = "pcaerr",
    version,
    about = "Eigenvector error bounds for PCA: planning and Monte Carlo checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample-size table per target (no sampling).
    Plan(Args),
    /// Monte Carlo coverage run; writes trials.jsonl and report.json.
    Simulate(Args),
    /// Pilot estimate of c1 from the empirical ||E|| quantile.
    Calibrate(Args),
    /// Old versus improved sample size across the beta-model grid.
    Sweep(Args),
    /// Deterministic inequality suite; exit 3 on any violation.
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    /// key=value, repeatable; dotted keys reach nested sections.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Write the trial-0 data matrix as CSV (simulate only).
    #[arg(long)]
    dump_data: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Plan(a) => (Command::Plan, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Calibrate(a) => (Command::Calibrate, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Verify(a) => (Command::Verify, a),
    };
    let inv = Invocation {
        command,
        config: args.config,
        out: args.out,
        seed: args.seed,
        trials: args.trials,
        overrides: args.overrides,
        dump_data: args.dump_data,
    };
    match run(&inv, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcaerr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
