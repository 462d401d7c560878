//! The computation every computing peer runs once inputs are in.

use std::collections::BTreeMap;

use kex_core::compat::{share_record, MedicalRecord, SharedRecord, BLOOD_GROUPS};
use kex_core::field::FieldElement;
use kex_core::mpc::{MpcError, Session, SharedValue, SharedVector};
use kex_core::protocol::{crossover_ke, mates_to_ids, ProtocolOptions};
use kex_core::shamir::{reconstruct, Share, SharingParams};
use rand::Rng;

use crate::error::CliError;
use crate::wire::RecordShares;

/// Larger pools exceed both the runtime calibration and the 7-day measurement cutoff.
pub const MAX_VERTICES: usize = 64;

pub fn vector_len(panel: usize) -> usize {
    2 * BLOOD_GROUPS + 2 * panel
}

pub fn check_size(vertices: usize) -> Result<(), CliError> {
    if vertices == 0 {
        return Err(CliError::Config("at least one pair is required".into()));
    }
    if vertices > MAX_VERTICES {
        return Err(CliError::Infeasible(format!("{vertices} pairs, at most {MAX_VERTICES} are supported")));
    }
    Ok(())
}

/// Checks records for a common panel length and usable, distinct pair ids.
pub fn check_records(records: &[MedicalRecord]) -> Result<usize, CliError> {
    check_size(records.len())?;
    let panel = records[0].panel_len();
    let mut seen = std::collections::HashSet::new();
    for r in records {
        if r.panel_len() != panel {
            return Err(CliError::Config(format!("record {} has panel length {}, expected {panel}", r.pair_id, r.panel_len())));
        }
        if r.pair_id == 0 {
            return Err(CliError::Config("pair id 0 is reserved for unmatched".into()));
        }
        if !seen.insert(r.pair_id) {
            return Err(CliError::Config(format!("duplicate pair id {}", r.pair_id)));
        }
    }
    Ok(panel)
}

/// Shares every record; entry `p - 1` holds what computing peer `p` receives.
pub fn share_all<R: Rng + ?Sized>(records: &[MedicalRecord], params: &SharingParams, rng: &mut R) -> Vec<Vec<RecordShares>> {
    let mut per_peer: Vec<Vec<RecordShares>> = vec![Vec::new(); params.parties()];
    for r in records {
        for (p, shares) in share_record(r, params, rng).into_iter().enumerate() {
            per_peer[p].push((r.pair_id, shares));
        }
    }
    per_peer
}

/// Orders inputs by pair id and runs the protocol; returns shares of each
/// pair's partner id (0 when unmatched), in the same order as the ids.
pub fn compute(
    s: &mut Session,
    inputs: &[RecordShares],
    panel: usize,
    opts: &ProtocolOptions,
) -> Result<(Vec<u64>, SharedVector), MpcError> {
    let sorted: BTreeMap<u64, &Vec<FieldElement>> = inputs.iter().map(|(id, v)| (*id, v)).collect();
    if sorted.len() != inputs.len() {
        return Err(MpcError::Config("duplicate pair ids".into()));
    }
    let ids: Vec<u64> = sorted.keys().copied().collect();
    let records = sorted
        .values()
        .map(|v| {
            let shared: Vec<SharedValue> = v.iter().map(|&f| SharedValue::from_share(f)).collect();
            SharedRecord::from_flat(&shared, panel)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let out = crossover_ke(s, &records, opts)?;
    let mates = mates_to_ids(s, &out.mate, &ids)?;
    Ok((ids, mates))
}

/// Combines per-peer `(pair id, share)` rows into `(pair id, partner id)`.
pub fn reconstruct_rows(per_peer: &[Vec<(u64, FieldElement)>], params: &SharingParams) -> Result<Vec<(u64, u64)>, CliError> {
    let first = per_peer.first().ok_or_else(|| CliError::Other("no results".into()))?;
    first
        .iter()
        .enumerate()
        .map(|(i, &(id, _))| {
            let shares = per_peer
                .iter()
                .enumerate()
                .map(|(p, rows)| match rows.get(i) {
                    Some(&(rid, v)) if rid == id => Ok(Share::new(p + 1, v)),
                    _ => Err(CliError::Transport(format!("peer {} returned inconsistent rows", p + 1))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mate = reconstruct(&shares, params).map_err(|e| CliError::Other(e.to_string()))?;
            Ok((id, mate.value()))
        })
        .collect()
}

pub fn write_mates<W: std::io::Write>(w: W, rows: &[(u64, u64)]) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["pair_id", "mate_pair_id"])?;
    for (id, mate) in rows {
        out.write_record([id.to_string(), mate.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
