//! Fixtures shared by the criterion benches.

use kex_core::compat::MedicalRecord;
use kex_core::matching::Graph;
use kex_core::mpc::LocalConfig;
use kex_core::sim::GeneratorConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded in-process peers on a virtual clock, without opening checks.
pub fn local_config(seed: u64) -> LocalConfig {
    LocalConfig {
        verify_openings: false,
        ..LocalConfig::default().with_seed(seed)
    }
}

pub fn random_records(n: usize, panel: usize, seed: u64) -> Vec<MedicalRecord> {
    let generator = GeneratorConfig {
        panel,
        incompatible_only: false,
        ..GeneratorConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n as u64).map(|id| generator.sample(id, &mut rng)).collect()
}

pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    Graph::random(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}
