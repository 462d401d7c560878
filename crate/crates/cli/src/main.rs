//! `kex`: computing-peer daemon, one-shot matching, oracle, benchmarks and simulation.

mod bench;
mod error;
mod match_cmd;
mod oracle;
mod peer;
mod pipeline;
mod simulate;
mod wire;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kex", version, about = "Privacy-preserving crossover kidney exchange")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Seed for every random choice; wall-clock fields still vary.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Subcommand configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output by default.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a computing peer for one session.
    Peer(peer::PeerArgs),
    /// Match a record file, in-process or through running peers.
    Match(match_cmd::MatchArgs),
    /// Plaintext maximum matching of a graph file.
    Oracle(oracle::OracleArgs),
    /// Measure protocol runtime and traffic.
    Bench(bench::BenchArgs),
    /// Sweep the exchange simulation over both backends.
    Simulate(simulate::SimulateArgs),
}

pub fn open_out(common: &Common) -> Result<Box<dyn Write>, CliError> {
    Ok(match &common.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Peer(a) => peer::run(a, &cli.common),
        Command::Match(a) => match_cmd::run(a, &cli.common),
        Command::Oracle(a) => oracle::run(a, &cli.common),
        Command::Bench(a) => bench::run(a, &cli.common),
        Command::Simulate(a) => simulate::run(a, &cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kex: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
