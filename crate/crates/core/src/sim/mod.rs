//! Discrete-event simulation of a dynamic exchange platform.

pub mod config;
pub mod engine;
pub mod generator;
pub mod runtime;
pub mod sweep;

use thiserror::Error;

pub use config::{Backend, SimConfig, SweepConfig};
pub use engine::{
    resolve_offer, run_simulation, run_simulation_with_records, MatchRunLog, Metrics, OfferOutcome, PairRecord, PairState,
    StateCounts,
};
pub use generator::{CompactRecord, GeneratorConfig};
pub use runtime::{split_pool, RuntimeModel};
pub use sweep::{run_sweep, SweepRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no runtime calibration for latency {0} ms")]
    UnknownLatency(f64),
}
