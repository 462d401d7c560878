//! Medical compatibility as indicator vectors, evaluated in the clear or on shares.
//!
//! Blood groups use `|B| = 4` positions in the order O, A, B, AB. A donor's
//! vector is one-hot; a patient's vector is the set of donor groups the
//! patient can receive. Antigen and antibody vectors share one panel of
//! length `|A|`; a donor is tissue-compatible when the patient has no
//! antibody against any of the donor's antigens.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::field::FieldElement;
use crate::matching::Graph;
use crate::mpc::{and_all, eqz_batch, inner_product, MpcError, Session, SharedMatrix, SharedValue};
use crate::shamir::{self, SharingParams};

pub const BLOOD_GROUPS: usize = 4;
pub const DEFAULT_PANEL: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("record {0}: panel length {1}, expected {2}")]
    PanelLength(u64, usize, usize),
    #[error("duplicate pair id {0}")]
    DuplicateId(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Abo {
    O,
    A,
    B,
    AB,
}

impl Abo {
    pub const ALL: [Abo; 4] = [Abo::O, Abo::A, Abo::B, Abo::AB];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Standard ABO rule: O gives to all, AB receives from all.
    pub fn can_donate_to(self, recipient: Abo) -> bool {
        matches!(
            (self, recipient),
            (Abo::O, _) | (Abo::A, Abo::A | Abo::AB) | (Abo::B, Abo::B | Abo::AB) | (Abo::AB, Abo::AB)
        )
    }

    /// Donor groups a patient of this group can receive.
    pub fn acceptable_donors(self) -> Vec<Abo> {
        Self::ALL.into_iter().filter(|d| d.can_donate_to(self)).collect()
    }
}

impl fmt::Display for Abo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Abo::O => "O",
            Abo::A => "A",
            Abo::B => "B",
            Abo::AB => "AB",
        })
    }
}

impl FromStr for Abo {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "O" => Ok(Abo::O),
            "A" => Ok(Abo::A),
            "B" => Ok(Abo::B),
            "AB" => Ok(Abo::AB),
            other => Err(format!("unknown blood group {other:?}")),
        }
    }
}

/// One patient-donor pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MedicalRecord {
    pub pair_id: u64,
    /// `B^d`: one-hot donor blood group.
    pub donor_blood: [bool; BLOOD_GROUPS],
    /// `B^p`: donor groups the patient accepts.
    pub patient_blood: [bool; BLOOD_GROUPS],
    /// `A^d`: donor antigens.
    pub donor_antigens: Vec<bool>,
    /// `A^p`: patient antibodies.
    pub patient_antibodies: Vec<bool>,
    /// Used only by the simulator; never shared.
    pub sensitized: bool,
}

impl MedicalRecord {
    pub fn new(
        pair_id: u64,
        donor: Abo,
        accepts: &[Abo],
        donor_antigens: Vec<bool>,
        patient_antibodies: Vec<bool>,
        sensitized: bool,
    ) -> Self {
        let mut donor_blood = [false; BLOOD_GROUPS];
        donor_blood[donor.index()] = true;
        let mut patient_blood = [false; BLOOD_GROUPS];
        for a in accepts {
            patient_blood[a.index()] = true;
        }
        Self {
            pair_id,
            donor_blood,
            patient_blood,
            donor_antigens,
            patient_antibodies,
            sensitized,
        }
    }

    pub fn panel_len(&self) -> usize {
        self.donor_antigens.len()
    }

    pub fn donor_group(&self) -> Abo {
        Abo::ALL[self.donor_blood.iter().position(|&b| b).unwrap_or(0)]
    }

    /// The layout shared with the computing peers: `B^d, B^p, A^d, A^p`.
    pub fn to_vector(&self) -> Vec<u64> {
        self.donor_blood
            .iter()
            .chain(&self.patient_blood)
            .chain(&self.donor_antigens)
            .chain(&self.patient_antibodies)
            .map(|&b| b as u64)
            .collect()
    }

    /// `pair_id,donor,accepted groups joined by '|',antigen bits,antibody bits,sensitized`
    pub fn to_line(&self) -> String {
        let bits = |v: &[bool]| v.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        let accepts: Vec<String> = Abo::ALL
            .iter()
            .filter(|a| self.patient_blood[a.index()])
            .map(|a| a.to_string())
            .collect();
        format!(
            "{},{},{},{},{},{}",
            self.pair_id,
            self.donor_group(),
            accepts.join("|"),
            bits(&self.donor_antigens),
            bits(&self.patient_antibodies),
            self.sensitized as u8
        )
    }
}

/// Whether the donor of `u` can give to the patient of `v`.
pub fn compatible(u: &MedicalRecord, v: &MedicalRecord) -> bool {
    let blood = u.donor_blood.iter().zip(&v.patient_blood).any(|(&d, &p)| d && p);
    let conflict = u.donor_antigens.iter().zip(&v.patient_antibodies).any(|(&g, &b)| g && b);
    blood && !conflict
}

/// Crossover compatibility graph: an edge wherever both directions are compatible.
pub fn plaintext_adjacency(records: &[MedicalRecord]) -> Graph {
    let n = records.len();
    let mut g = Graph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if compatible(&records[u], &records[v]) && compatible(&records[v], &records[u]) {
                g.add_edge(u + 1, v + 1).expect("in range");
            }
        }
    }
    g
}

/// Parses a record file. Blank lines and `#` comments are skipped.
pub fn parse_records(text: &str) -> Result<Vec<MedicalRecord>, CompatError> {
    let mut out: Vec<MedicalRecord> = Vec::new();
    let mut panel = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| CompatError::Parse { line, msg };
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, got {}", f.len())));
        }
        let pair_id: u64 = f[0].parse().map_err(|_| err(format!("bad pair id {:?}", f[0])))?;
        let donor: Abo = f[1].parse().map_err(err)?;
        let accepts = if f[2].is_empty() {
            Vec::new()
        } else {
            f[2].split('|').map(str::parse).collect::<Result<Vec<Abo>, _>>().map_err(err)?
        };
        let bits = |s: &str| -> Result<Vec<bool>, CompatError> {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(err(format!("bad bit {c:?}"))),
                })
                .collect()
        };
        let antigens = bits(f[3])?;
        let antibodies = bits(f[4])?;
        let sensitized = match f[5] {
            "0" | "false" => false,
            "1" | "true" => true,
            s => return Err(err(format!("bad sensitized flag {s:?}"))),
        };
        let expected = *panel.get_or_insert(antigens.len());
        for len in [antigens.len(), antibodies.len()] {
            if len != expected {
                return Err(CompatError::PanelLength(pair_id, len, expected));
            }
        }
        if out.iter().any(|r| r.pair_id == pair_id) {
            return Err(CompatError::DuplicateId(pair_id));
        }
        out.push(MedicalRecord::new(pair_id, donor, &accepts, antigens, antibodies, sensitized));
    }
    Ok(out)
}

/// One peer's shares of one record, in the [`MedicalRecord::to_vector`] layout.
#[derive(Debug, Clone)]
pub struct SharedRecord {
    pub donor_blood: Vec<SharedValue>,
    pub patient_blood: Vec<SharedValue>,
    pub donor_antigens: Vec<SharedValue>,
    pub patient_antibodies: Vec<SharedValue>,
}

impl SharedRecord {
    /// Splits a flat share vector of length `2 * |B| + 2 * panel`.
    pub fn from_flat(flat: &[SharedValue], panel: usize) -> Result<Self, MpcError> {
        let expected = 2 * BLOOD_GROUPS + 2 * panel;
        if flat.len() != expected {
            return Err(MpcError::LengthMismatch(flat.len(), expected));
        }
        let (b, a) = flat.split_at(2 * BLOOD_GROUPS);
        Ok(Self {
            donor_blood: b[..BLOOD_GROUPS].to_vec(),
            patient_blood: b[BLOOD_GROUPS..].to_vec(),
            donor_antigens: a[..panel].to_vec(),
            patient_antibodies: a[panel..].to_vec(),
        })
    }

    pub fn panel_len(&self) -> usize {
        self.donor_antigens.len()
    }
}

/// What an input peer does: Shamir-shares its record vector. Returns, per
/// computing peer, the flat share vector to send.
pub fn share_record<R: Rng + ?Sized>(record: &MedicalRecord, params: &SharingParams, rng: &mut R) -> Vec<Vec<FieldElement>> {
    let mut per_peer = vec![Vec::new(); params.parties()];
    for v in record.to_vector() {
        for s in shamir::share(params.element(v), params, rng) {
            per_peer[s.party - 1].push(s.value);
        }
    }
    per_peer
}

/// `[compatible(donor of u, patient of v)]` for each `(u, v)`, all batched:
/// one round of inner products, one zero test, one product.
pub fn comp_check_batch(s: &mut Session, pairs: &[(&SharedRecord, &SharedRecord)]) -> Result<Vec<SharedValue>, MpcError> {
    let mut products: Vec<(&[SharedValue], &[SharedValue])> = Vec::with_capacity(2 * pairs.len());
    for (u, v) in pairs {
        if u.panel_len() != v.panel_len() {
            return Err(MpcError::LengthMismatch(u.panel_len(), v.panel_len()));
        }
        products.push((&u.donor_blood, &v.patient_blood));
        products.push((&u.donor_antigens, &v.patient_antibodies));
    }
    let sums = inner_product(s, &products)?;
    let conflicts: Vec<SharedValue> = sums.iter().skip(1).step_by(2).copied().collect();
    let tissue_ok = eqz_batch(s, &conflicts)?;
    let blood_ok: Vec<SharedValue> = sums.iter().step_by(2).copied().collect();
    Ok(s.mul_batch(&blood_ok, &tissue_ok)?.into_inner())
}

pub fn comp_check(s: &mut Session, u: &SharedRecord, v: &SharedRecord) -> Result<SharedValue, MpcError> {
    Ok(comp_check_batch(s, &[(u, v)])?[0])
}

/// Shared adjacency matrix: `A(u, v) = c(u -> v) * c(v -> u)`, zero diagonal.
pub fn build_adjacency(s: &mut Session, records: &[SharedRecord]) -> Result<SharedMatrix, MpcError> {
    let n = records.len();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1));
    for u in 0..n {
        for v in 0..n {
            if u != v {
                pairs.push((&records[u], &records[v]));
            }
        }
    }
    let directed = comp_check_batch(s, &pairs)?;
    let at = |u: usize, v: usize| directed[u * (n - 1) + if v > u { v - 1 } else { v }];
    let mut upper = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            upper.push(vec![at(u, v), at(v, u)]);
        }
    }
    let edges = and_all(s, upper)?;
    let mut data = vec![s.zero(); n * n];
    let mut k = 0;
    for u in 0..n {
        for v in u + 1..n {
            data[u * n + v] = edges[k];
            data[v * n + u] = edges[k];
            k += 1;
        }
    }
    SharedMatrix::new(n, n, data)
}
