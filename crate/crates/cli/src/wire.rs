//! Submission port: input peers send record shares to a computing peer and
//! read back shares of their pairs' partners.
//!
//! All integers are little-endian. A submission is `b"KEXS"`, u16 session id,
//! u32 record count, u32 vector length, then per record a u64 pair id and the
//! share vector as u64 field elements. The reply is a u32 count followed by
//! `(u64 pair id, u64 share of the partner's pair id)` per record.

use std::io::{Read, Write};

use kex_core::field::{FieldElement, ELEMENT_BYTES};

use crate::error::CliError;

const MAGIC: &[u8; 4] = b"KEXS";

pub type RecordShares = (u64, Vec<FieldElement>);

pub fn write_submission<W: Write>(w: &mut W, session: u16, records: &[RecordShares]) -> std::io::Result<()> {
    let len = records.first().map_or(0, |r| r.1.len());
    let mut buf = Vec::with_capacity(14 + records.len() * (8 + len * ELEMENT_BYTES));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&session.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(len as u32).to_le_bytes());
    for (id, shares) in records {
        buf.extend_from_slice(&id.to_le_bytes());
        for s in shares {
            buf.extend_from_slice(&s.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn element<R: Read>(r: &mut R, prime: u64) -> Result<FieldElement, CliError> {
    let mut b = [0u8; ELEMENT_BYTES];
    r.read_exact(&mut b).map_err(|e| CliError::Transport(e.to_string()))?;
    FieldElement::from_le_bytes(&b, prime).map_err(|e| CliError::Config(e.to_string()))
}

/// Reads one submission, checking the session, vector length and a record budget.
pub fn read_submission<R: Read>(
    r: &mut R,
    session: u16,
    vector_len: usize,
    max_records: usize,
    prime: u64,
) -> Result<Vec<RecordShares>, CliError> {
    let io = |e: std::io::Error| CliError::Transport(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(CliError::Config("submission does not start with the expected magic".into()));
    }
    let mut sid = [0u8; 2];
    r.read_exact(&mut sid).map_err(io)?;
    if u16::from_le_bytes(sid) != session {
        return Err(CliError::Config(format!("submission for session {}, expected {session}", u16::from_le_bytes(sid))));
    }
    let count = read_u32(r).map_err(io)? as usize;
    let len = read_u32(r).map_err(io)? as usize;
    if count > max_records {
        return Err(CliError::Config(format!("submission of {count} records exceeds the remaining {max_records}")));
    }
    if count > 0 && len != vector_len {
        return Err(CliError::Config(format!("record vectors of length {len}, expected {vector_len}")));
    }
    (0..count)
        .map(|_| {
            let id = read_u64(r).map_err(io)?;
            let shares = (0..len).map(|_| element(r, prime)).collect::<Result<_, _>>()?;
            Ok((id, shares))
        })
        .collect()
}

pub fn write_result<W: Write>(w: &mut W, rows: &[(u64, FieldElement)]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(4 + rows.len() * 16);
    buf.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    for (id, share) in rows {
        buf.extend_from_slice(&id.to_le_bytes());
        buf.extend_from_slice(&share.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_result<R: Read>(r: &mut R, prime: u64) -> Result<Vec<(u64, FieldElement)>, CliError> {
    let io = |e: std::io::Error| CliError::Transport(e.to_string());
    let count = read_u32(r).map_err(io)? as usize;
    (0..count)
        .map(|_| {
            let id = read_u64(r).map_err(io)?;
            Ok((id, element(r, prime)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use kex_core::DEFAULT_PRIME;

    #[test]
    fn roundtrip() {
        let fe = |v| FieldElement::new(v, DEFAULT_PRIME);
        let records = vec![(4, vec![fe(1), fe(2)]), (9, vec![fe(3), fe(DEFAULT_PRIME - 1)])];
        let mut buf = Vec::new();
        write_submission(&mut buf, 5, &records).unwrap();
        assert_eq!(read_submission(&mut buf.as_slice(), 5, 2, 2, DEFAULT_PRIME).unwrap(), records);
        assert!(read_submission(&mut buf.as_slice(), 6, 2, 2, DEFAULT_PRIME).is_err());
        assert!(read_submission(&mut buf.as_slice(), 5, 3, 2, DEFAULT_PRIME).is_err());
        assert!(read_submission(&mut buf.as_slice(), 5, 2, 1, DEFAULT_PRIME).is_err());

        let rows = vec![(4, fe(9)), (9, fe(4))];
        let mut out = Vec::new();
        write_result(&mut out, &rows).unwrap();
        assert_eq!(read_result(&mut out.as_slice(), DEFAULT_PRIME).unwrap(), rows);
    }
}
