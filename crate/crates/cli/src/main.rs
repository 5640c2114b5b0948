//! `wcrisk`: worst-case risk bounds and curves from a JSON run configuration.

mod commands;
mod config;
mod error;
mod expr;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Format;
use crate::config::Overrides;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "wcrisk", version, about = "Worst-case signed Choquet risk bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the grid size M.
    #[arg(long)]
    grid: Option<usize>,
    /// Overrides the Monte Carlo sample size N.
    #[arg(long)]
    samples: Option<usize>,
    /// Wasserstein radius δ; replaces the budget with δ² for unit quadratic costs.
    #[arg(long)]
    radius: Option<f64>,
}

impl RunArgs {
    fn plan(&self) -> Result<config::Plan, CliError> {
        let cfg = config::load(&self.config)?;
        cfg.resolve(&Overrides {
            seed: self.seed,
            grid: self.grid,
            samples: self.samples,
            radius: self.radius,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Lower and upper bounds on the worst-case risk.
    Bound {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Reference, worst-case and pre-projection quantile curves as CSV.
    WorstCase {
        #[command(flatten)]
        run: RunArgs,
    },
    /// The aggregated reference sample g(X_i) as CSV.
    Sample {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Runs a randomized oracle suite.
    Verify {
        /// isotonic, separability, inclusion, oracle-worstcase or table1
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bound { run, format } => {
            let computed = commands::compute(run.plan()?)?;
            let text = match format {
                Format::Json => commands::canonical_json(&computed.report)?,
                Format::Csv => commands::bound_csv(&computed),
            };
            commands::emit(run.out.as_deref(), &text)
        }
        Command::WorstCase { run } => {
            let computed = commands::compute(run.plan()?)?;
            commands::emit(run.out.as_deref(), &commands::worst_case_csv(&computed)?)
        }
        Command::Sample { run } => commands::emit(run.out.as_deref(), &commands::sample_csv(run.plan()?)?),
        Command::Verify { suite, seed } => commands::verify(&suite, seed, &mut std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wcrisk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
