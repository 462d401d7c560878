//! Synthetic patient-donor pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compat::{compatible, Abo, MedicalRecord, BLOOD_GROUPS, DEFAULT_PANEL};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub panel: usize,
    /// Population frequencies of O, A, B, AB.
    pub abo_frequencies: [f64; BLOOD_GROUPS],
    pub sensitized_prevalence: f64,
    pub antigen_prob: f64,
    pub antibody_prob_sensitized: f64,
    pub antibody_prob_other: f64,
    /// Discard pairs whose own donor can give to their patient.
    pub incompatible_only: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            panel: DEFAULT_PANEL,
            abo_frequencies: [0.44, 0.42, 0.10, 0.04],
            sensitized_prevalence: 0.2,
            antigen_prob: 0.12,
            antibody_prob_sensitized: 0.3,
            antibody_prob_other: 0.02,
            incompatible_only: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            self.sensitized_prevalence,
            self.antigen_prob,
            self.antibody_prob_sensitized,
            self.antibody_prob_other,
        ];
        if probs.iter().chain(&self.abo_frequencies).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SimError::Config("generator probabilities must lie in [0, 1]".into()));
        }
        if self.abo_frequencies.iter().sum::<f64>() <= 0.0 {
            return Err(SimError::Config("blood group frequencies sum to zero".into()));
        }
        Ok(())
    }

    fn blood_group<R: Rng + ?Sized>(&self, rng: &mut R) -> Abo {
        let total: f64 = self.abo_frequencies.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        for (g, &f) in Abo::ALL.iter().zip(&self.abo_frequencies) {
            if u < f {
                return *g;
            }
            u -= f;
        }
        Abo::AB
    }

    /// Draws one pair. With `incompatible_only`, resamples until the pair's own
    /// donor is unsuitable, giving up after a bounded number of tries.
    pub fn sample<R: Rng + ?Sized>(&self, pair_id: u64, rng: &mut R) -> MedicalRecord {
        let mut record = self.sample_once(pair_id, rng);
        for _ in 0..1000 {
            if !self.incompatible_only || !compatible(&record, &record) {
                break;
            }
            record = self.sample_once(pair_id, rng);
        }
        record
    }

    fn sample_once<R: Rng + ?Sized>(&self, pair_id: u64, rng: &mut R) -> MedicalRecord {
        let donor = self.blood_group(rng);
        let patient = self.blood_group(rng);
        let sensitized = rng.gen_bool(self.sensitized_prevalence);
        let ab_prob = if sensitized { self.antibody_prob_sensitized } else { self.antibody_prob_other };
        let antigens = (0..self.panel).map(|_| rng.gen_bool(self.antigen_prob)).collect();
        let antibodies = (0..self.panel).map(|_| rng.gen_bool(ab_prob)).collect();
        MedicalRecord::new(pair_id, donor, &patient.acceptable_donors(), antigens, antibodies, sensitized)
    }
}

/// Bitmask form of a record for fast pairwise checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactRecord {
    donor_blood: u8,
    patient_blood: u8,
    antigens: Vec<u64>,
    antibodies: Vec<u64>,
}

impl CompactRecord {
    pub fn new(r: &MedicalRecord) -> Self {
        let mask = |v: &[bool]| v.iter().enumerate().fold(0u8, |m, (i, &b)| m | (u8::from(b) << i));
        let words = |v: &[bool]| {
            v.chunks(64)
                .map(|c| c.iter().enumerate().fold(0u64, |m, (i, &b)| m | (u64::from(b) << i)))
                .collect()
        };
        Self {
            donor_blood: mask(&r.donor_blood),
            patient_blood: mask(&r.patient_blood),
            antigens: words(&r.donor_antigens),
            antibodies: words(&r.patient_antibodies),
        }
    }

    /// Whether this pair's donor can give to `other`'s patient.
    pub fn donates_to(&self, other: &CompactRecord) -> bool {
        self.donor_blood & other.patient_blood != 0
            && self.antigens.iter().zip(&other.antibodies).all(|(g, b)| g & b == 0)
    }
}
