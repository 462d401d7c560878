//! Protocol runtime as a function of pool size and network latency.

use serde::Deserialize;

use super::SimError;

const EMBEDDED: &str = include_str!("../../../../data/runtime_calibration.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Anchor {
    pub pool_size: usize,
    pub runtime_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LatencyFactor {
    pub latency_ms: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RuntimeModel {
    pub max_runtime_hours: f64,
    pub anchors: Vec<Anchor>,
    pub latency: Vec<LatencyFactor>,
}

impl Default for RuntimeModel {
    fn default() -> Self {
        Self::from_toml(EMBEDDED).expect("embedded calibration is valid")
    }
}

impl RuntimeModel {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let model: RuntimeModel = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.anchors.is_empty() {
            return Err(SimError::Config("runtime model has no anchors".into()));
        }
        if !(self.max_runtime_hours > 0.0) {
            return Err(SimError::Config("max_runtime_hours must be positive".into()));
        }
        for w in self.anchors.windows(2) {
            if w[1].pool_size <= w[0].pool_size || w[1].runtime_hours < w[0].runtime_hours {
                return Err(SimError::Config("anchors must be increasing in size and nondecreasing in runtime".into()));
            }
        }
        if self.anchors.iter().any(|a| !(a.runtime_hours >= 0.0)) {
            return Err(SimError::Config("anchor runtimes must be nonnegative".into()));
        }
        if self.latency.iter().any(|l| !(l.factor > 0.0)) {
            return Err(SimError::Config("latency factors must be positive".into()));
        }
        Ok(())
    }

    pub fn factor(&self, latency_ms: f64) -> Result<f64, SimError> {
        self.latency
            .iter()
            .find(|l| (l.latency_ms - latency_ms).abs() < 1e-9)
            .map(|l| l.factor)
            .ok_or(SimError::UnknownLatency(latency_ms))
    }

    /// Hours for one protocol run on `size` pairs; `None` when infeasible.
    pub fn runtime_hours(&self, latency_ms: f64, size: usize) -> Result<Option<f64>, SimError> {
        let factor = self.factor(latency_ms)?;
        if size == 0 {
            return Ok(Some(0.0));
        }
        let hours = self
            .anchors
            .iter()
            .find(|a| a.pool_size >= size)
            .map(|a| a.runtime_hours * factor);
        Ok(hours.filter(|&h| h <= self.max_runtime_hours))
    }

    /// Largest pool size whose runtime stays strictly below the match run interval.
    pub fn cap(&self, latency_ms: f64, interval_days: f64) -> Result<usize, SimError> {
        let limit = interval_days * 24.0;
        let last = self.anchors.last().map_or(0, |a| a.pool_size);
        let mut cap = 0;
        for size in 1..=last {
            match self.runtime_hours(latency_ms, size)? {
                Some(h) if h < limit => cap = size,
                _ => break,
            }
        }
        Ok(cap)
    }
}

/// Minimum number of balanced sub-pools of at most `cap` pairs each.
pub fn split_pool(pool_size: usize, cap: usize) -> Vec<usize> {
    if pool_size == 0 || cap == 0 {
        return Vec::new();
    }
    let k = pool_size.div_ceil(cap);
    let (base, extra) = (pool_size / k, pool_size % k);
    (0..k).map(|i| base + usize::from(i < extra)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_anchors() {
        let m = RuntimeModel::default();
        assert_eq!(m.runtime_hours(1.0, 60).unwrap(), Some(127.0));
        assert!(m.runtime_hours(1.0, 5).unwrap().unwrap() <= 1.0 / 60.0 + 1e-6);
        assert_eq!(m.runtime_hours(1.0, 6).unwrap(), Some(1.5));
        assert_eq!(m.runtime_hours(1.0, 65).unwrap(), None);
        assert_eq!(m.runtime_hours(5.0, 60).unwrap(), None);
        assert!((m.runtime_hours(10.0, 20).unwrap().unwrap() - 13.83).abs() < 1e-9);
        assert!(m.runtime_hours(2.0, 5).is_err());
    }

    #[test]
    fn caps() {
        let m = RuntimeModel::default();
        assert_eq!(m.cap(1.0, 1.0).unwrap(), 20);
        assert_eq!(m.cap(1.0, 2.0).unwrap(), 40);
        assert_eq!(m.cap(1.0, 7.0).unwrap(), 60);
        assert_eq!(m.cap(1.0, 120.0).unwrap(), 64);
        assert_eq!(m.cap(10.0, 1.0).unwrap(), 20);
        assert_eq!(m.cap(1.0, 0.0001).unwrap(), 0);
    }

    #[test]
    fn splits() {
        assert_eq!(split_pool(130, 64), vec![44, 43, 43]);
        assert_eq!(split_pool(60, 64), vec![60]);
        assert!(split_pool(0, 64).is_empty());
        assert!(split_pool(10, 0).is_empty());
        for pool in 1..300 {
            for cap in 1..70 {
                let s = split_pool(pool, cap);
                assert_eq!(s.iter().sum::<usize>(), pool);
                let k = s.len();
                assert!(pool.div_ceil(k) <= cap);
                assert!(k == 1 || pool.div_ceil(k - 1) > cap);
                assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            }
        }
    }

    #[test]
    fn rejects_nonmonotone() {
        let text = "max_runtime_hours = 1.0\n[[anchors]]\npool_size = 5\nruntime_hours = 2.0\n[[anchors]]\npool_size = 6\nruntime_hours = 1.0\n[[latency]]\nlatency_ms = 1.0\nfactor = 1.0\n";
        assert!(RuntimeModel::from_toml(text).is_err());
    }
}
