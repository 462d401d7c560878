//! Simulation parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::generator::GeneratorConfig;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Matching is computed instantly on the whole pool.
    Conventional,
    /// Matching takes the calibrated protocol runtime, on sub-pools small enough
    /// to finish before the next match run.
    PrivacyPreserving,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Conventional, Backend::PrivacyPreserving];
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Conventional => "conventional",
            Backend::PrivacyPreserving => "privacy_preserving",
        })
    }
}

impl FromStr for Backend {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "conventional" => Ok(Backend::Conventional),
            "privacy_preserving" | "pp" => Ok(Backend::PrivacyPreserving),
            other => Err(SimError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub arrival_interval_days: f64,
    pub match_run_interval_days: f64,
    pub mean_stay_days: f64,
    pub refusal_prob: f64,
    pub crossmatch_fail_sensitized: f64,
    pub crossmatch_fail_other: f64,
    pub reentry_refusal_days: f64,
    pub reentry_crossmatch_days: f64,
    pub horizon_days: f64,
    pub runs: usize,
    pub backend: Backend,
    pub latency_ms: f64,
    /// Exponential inter-arrival times with the same mean instead of a fixed spacing.
    pub poisson_arrivals: bool,
    pub generator: GeneratorConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            arrival_interval_days: 7.0,
            match_run_interval_days: 7.0,
            mean_stay_days: 800.0,
            refusal_prob: 0.1,
            crossmatch_fail_sensitized: 0.35,
            crossmatch_fail_other: 0.10,
            reentry_refusal_days: 2.0,
            reentry_crossmatch_days: 7.0,
            horizon_days: 1825.0,
            runs: 50,
            backend: Backend::Conventional,
            latency_ms: 1.0,
            poisson_arrivals: false,
            generator: GeneratorConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [self.refusal_prob, self.crossmatch_fail_sensitized, self.crossmatch_fail_other];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SimError::Config("probabilities must lie in [0, 1]".into()));
        }
        if !(self.horizon_days > 0.0) {
            return Err(SimError::Config("horizon must be positive".into()));
        }
        let positive = [
            ("arrival_interval_days", self.arrival_interval_days),
            ("match_run_interval_days", self.match_run_interval_days),
            ("mean_stay_days", self.mean_stay_days),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::Config(format!("{name} must be positive")));
            }
        }
        if self.mean_stay_days < 1.0 {
            return Err(SimError::Config("mean_stay_days must be at least one day".into()));
        }
        if self.reentry_refusal_days < 0.0 || self.reentry_crossmatch_days < 0.0 {
            return Err(SimError::Config("reentry delays must be nonnegative".into()));
        }
        self.generator.validate()
    }
}

/// A parameter grid swept over both backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Fixed parameters; grid values override the matching fields.
    pub base: SimConfig,
    pub arrival_interval_days: Vec<f64>,
    pub match_run_interval_days: Vec<f64>,
    pub latency_ms: Vec<f64>,
    pub seeds: usize,
    pub first_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: SimConfig::default(),
            arrival_interval_days: vec![1.0, 2.0, 4.0, 7.0, 14.0],
            match_run_interval_days: vec![1.0, 2.0, 7.0, 14.0, 30.0, 60.0, 120.0],
            latency_ms: vec![1.0],
            seeds: 50,
            first_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.arrival_interval_days.is_empty() || self.match_run_interval_days.is_empty() || self.latency_ms.is_empty() {
            return Err(SimError::Config("every grid axis needs at least one value".into()));
        }
        if self.seeds == 0 {
            return Err(SimError::Config("seeds must be positive".into()));
        }
        for cfg in self.points() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Every grid point, ordered by arrival, match interval, then latency.
    pub fn points(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &a in &self.arrival_interval_days {
            for &m in &self.match_run_interval_days {
                for &l in &self.latency_ms {
                    out.push(SimConfig {
                        arrival_interval_days: a,
                        match_run_interval_days: m,
                        latency_ms: l,
                        runs: self.seeds,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_configs() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { refusal_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(SimConfig { horizon_days: 0.0, ..Default::default() }.validate().is_err());
        assert!(SimConfig { arrival_interval_days: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn sweep_from_toml() {
        let text = "seeds = 3\narrival_interval_days = [2.0]\nmatch_run_interval_days = [1.0, 7.0]\n[base]\nrefusal_prob = 0.2\nmean_stay_days = 400.0\n";
        let cfg = SweepConfig::from_toml(text).unwrap();
        let points = cfg.points();
        assert_eq!(points.len(), 2);
        assert_eq!(points[1].match_run_interval_days, 7.0);
        assert_eq!(points[0].refusal_prob, 0.2);
        assert!(SweepConfig::from_toml("bogus = 1").is_err());
    }
}
