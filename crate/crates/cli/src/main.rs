//! `kljn`: run key exchanges, lifetime estimates, network simulations,
//! attack sweeps and error-rate sweeps, writing CSV results.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::OutDir;

#[derive(Parser)]
#[command(
    name = "kljn",
    version,
    about = "KLJN key exchange and vehicular key distribution simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; omitted sections take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base RNG seed; overrides the `seed` in the config file.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Directory for the output files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Independent runs (exchange, simulate), runs per gamma (ber) or periods per sweep point (attack).
    #[arg(long, value_name = "N")]
    runs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exchange one key per run and write both parties' keys.
    Exchange(Common),
    /// Evaluate the key lifetime formula.
    Lifetime(Common),
    /// Run the vehicular key distribution simulation.
    Simulate(Common),
    /// Score passive eavesdropping strategies and sweep injection attacks.
    Attack(Common),
    /// Estimate the level-decision error rate against gamma.
    Ber(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Exchange(c)
    | Command::Lifetime(c)
    | Command::Simulate(c)
    | Command::Attack(c)
    | Command::Ber(c)) = &cli.command;
    let cfg = RunConfig::load(c.config.as_deref())?;
    let seed = cfg.resolve_seed(c.seed);
    let out = OutDir::create(&c.out)?;
    match &cli.command {
        Command::Exchange(_) => commands::exchange(&cfg, seed, c.runs.unwrap_or(1), &out),
        Command::Lifetime(_) => commands::lifetime(&cfg, &out),
        Command::Simulate(_) => commands::simulate(&cfg, seed, c.runs.unwrap_or(1), &out),
        Command::Attack(_) => commands::attack(&cfg, seed, c.runs, &out),
        Command::Ber(_) => commands::ber(&cfg, seed, c.runs, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("kljn: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
