//! Both backends over a parameter grid, with per-seed and mean rows.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Backend, SimConfig, SweepConfig};
use super::engine::{run_simulation, Metrics};
use super::runtime::RuntimeModel;
use super::SimError;

pub const MEAN_LABEL: &str = "mean";

/// One CSV row. `seed` is a seed number or `mean` for the average over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub arrival_interval: f64,
    pub match_interval: f64,
    pub latency: f64,
    pub backend: Backend,
    pub seed: String,
    pub transplants: f64,
    pub avg_wait_days: f64,
    pub sub_pool_splits: f64,
    /// Transplants relative to the conventional backend with the same seed
    /// (or the mean over seeds); empty when the conventional count is zero.
    pub pct_of_conventional: Option<f64>,
}

impl SweepRow {
    pub fn is_mean(&self) -> bool {
        self.seed == MEAN_LABEL
    }
}

fn pct(value: f64, reference: f64) -> Option<f64> {
    (reference > 0.0).then(|| 100.0 * value / reference)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Runs every grid point, backend and seed in parallel. The conventional
/// backend does not depend on latency, so it runs once per arrival and match
/// interval and is reported under each latency.
pub fn run_sweep(cfg: &SweepConfig, model: &RuntimeModel) -> Result<Vec<SweepRow>, SimError> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.first_seed + i).collect();
    let points = cfg.points();
    let mut jobs: Vec<(usize, SimConfig, u64)> = Vec::new();
    for (i, point) in points.iter().enumerate() {
        for backend in Backend::ALL {
            let first_latency = point.latency_ms == cfg.latency_ms[0];
            if backend == Backend::Conventional && !first_latency {
                continue;
            }
            for &seed in &seeds {
                jobs.push((i, SimConfig { backend, ..point.clone() }, seed));
            }
        }
    }
    let results: Vec<Metrics> = jobs
        .par_iter()
        .map(|(_, c, seed)| run_simulation(c, model, *seed))
        .collect::<Result<_, _>>()?;
    let lookup = |backend: Backend, a: f64, m: f64, l: f64, seed: u64| -> &Metrics {
        let idx = jobs
            .iter()
            .position(|(_, c, s)| {
                c.backend == backend
                    && c.arrival_interval_days == a
                    && c.match_run_interval_days == m
                    && (backend == Backend::Conventional || c.latency_ms == l)
                    && *s == seed
            })
            .expect("job was scheduled");
        &results[idx]
    };
    let mut rows = Vec::new();
    for point in &points {
        let (a, m, l) = (point.arrival_interval_days, point.match_run_interval_days, point.latency_ms);
        let conv: Vec<&Metrics> = seeds.iter().map(|&s| lookup(Backend::Conventional, a, m, l, s)).collect();
        let conv_mean = mean(conv.iter().map(|r| r.transplants as f64));
        for backend in Backend::ALL {
            let runs: Vec<&Metrics> = seeds.iter().map(|&s| lookup(backend, a, m, l, s)).collect();
            let row = |seed: String, t: f64, w: f64, splits: f64, reference: f64| SweepRow {
                arrival_interval: a,
                match_interval: m,
                latency: l,
                backend,
                seed,
                transplants: t,
                avg_wait_days: w,
                sub_pool_splits: splits,
                pct_of_conventional: pct(t, reference),
            };
            for ((&seed, r), c) in seeds.iter().zip(&runs).zip(&conv) {
                rows.push(row(
                    seed.to_string(),
                    r.transplants as f64,
                    r.avg_waiting_days,
                    r.sub_pool_splits as f64,
                    c.transplants as f64,
                ));
            }
            rows.push(row(
                MEAN_LABEL.to_string(),
                mean(runs.iter().map(|r| r.transplants as f64)),
                mean(runs.iter().map(|r| r.avg_waiting_days)),
                mean(runs.iter().map(|r| r.sub_pool_splits as f64)),
                conv_mean,
            ));
        }
    }
    Ok(rows)
}
