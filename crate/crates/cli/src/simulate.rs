//! Simulation sweep over both matching backends.

use std::path::PathBuf;

use clap::Args;
use kex_core::sim::{run_sweep, RuntimeModel, SimError, SweepConfig};

use crate::error::{read_input, CliError};
use crate::{open_out, Common};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Runtime calibration file; the shipped calibration by default.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Overrides the number of seeds per grid point.
    #[arg(long)]
    pub seeds: Option<usize>,
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

pub fn run(args: &SimulateArgs, common: &Common) -> Result<(), CliError> {
    let mut grid = match &common.config {
        Some(p) => SweepConfig::from_toml(&read_input(p)?)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = common.seed {
        grid.first_seed = seed;
    }
    if let Some(seeds) = args.seeds {
        grid.seeds = seeds;
    }
    let model = match &args.calibration {
        Some(p) => RuntimeModel::from_toml(&read_input(p)?)?,
        None => RuntimeModel::default(),
    };
    for &l in &grid.latency_ms {
        model.factor(l)?;
    }
    let rows = run_sweep(&grid, &model)?;
    let mut w = csv::Writer::from_writer(open_out(common)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
