//! Conditional selection and secret indexing.

use super::compare::eq_batch;
use super::{MpcError, Session, SharedValue, SharedVector};

/// `b ? x : y` as `b * (x - y) + y`; one multiplication.
pub fn select(s: &mut Session, b: SharedValue, x: SharedValue, y: SharedValue) -> Result<SharedValue, MpcError> {
    Ok(select_batch(s, &[b], &[x], &[y])?[0])
}

pub fn select_batch(
    s: &mut Session,
    bs: &[SharedValue],
    xs: &[SharedValue],
    ys: &[SharedValue],
) -> Result<SharedVector, MpcError> {
    if bs.len() != xs.len() || xs.len() != ys.len() {
        return Err(MpcError::LengthMismatch(bs.len(), xs.len().max(ys.len())));
    }
    let diff: Vec<SharedValue> = xs.iter().zip(ys).map(|(&x, &y)| x - y).collect();
    let prod = s.mul_batch(bs, &diff)?;
    Ok(prod.iter().zip(ys).map(|(&p, &y)| p + y).collect())
}

/// Logical OR of two shared bits.
pub fn or(s: &mut Session, a: SharedValue, b: SharedValue) -> Result<SharedValue, MpcError> {
    let ab = s.mul(a, b)?;
    Ok(a + b - ab)
}

/// Product of each group, evaluated as balanced trees batched across groups.
/// Empty groups yield 1.
pub fn and_all(s: &mut Session, mut groups: Vec<Vec<SharedValue>>) -> Result<SharedVector, MpcError> {
    loop {
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for g in &groups {
            for pair in g.chunks_exact(2) {
                lhs.push(pair[0]);
                rhs.push(pair[1]);
            }
        }
        if lhs.is_empty() {
            break;
        }
        let prod = s.mul_batch(&lhs, &rhs)?;
        let mut it = prod.iter();
        for g in groups.iter_mut() {
            let odd = if g.len() % 2 == 1 { g.last().copied() } else { None };
            let mut next: Vec<SharedValue> = (0..g.len() / 2).map(|_| *it.next().unwrap()).collect();
            next.extend(odd);
            *g = next;
        }
    }
    let one = s.constant(1);
    Ok(groups.into_iter().map(|g| g.first().copied().unwrap_or(one)).collect())
}

/// One-hot vector for a secret 1-based index; index 0 gives all zeros.
pub fn index_vector(s: &mut Session, i: SharedValue, len: usize) -> Result<SharedVector, MpcError> {
    Ok(index_vectors(s, &[i], len)?.pop().expect("one index"))
}

/// Several index vectors of the same length in one batch.
pub fn index_vectors(s: &mut Session, is: &[SharedValue], len: usize) -> Result<Vec<SharedVector>, MpcError> {
    let requests: Vec<(SharedValue, usize)> = is.iter().map(|&i| (i, len)).collect();
    index_vectors_sized(s, &requests)
}

/// Index vectors of individual lengths in one batch.
pub fn index_vectors_sized(s: &mut Session, requests: &[(SharedValue, usize)]) -> Result<Vec<SharedVector>, MpcError> {
    let mut lhs = Vec::new();
    let mut positions = Vec::new();
    for &(i, len) in requests {
        for j in 1..=len as u64 {
            lhs.push(i);
            positions.push(s.constant(j));
        }
    }
    let flat = eq_batch(s, &lhs, &positions)?;
    let mut offset = 0;
    Ok(requests
        .iter()
        .map(|&(_, len)| {
            let v = SharedVector::new(flat[offset..offset + len].to_vec());
            offset += len;
            v
        })
        .collect())
}

/// Inner products of several vector pairs in one multiplication round.
pub fn inner_product(
    s: &mut Session,
    pairs: &[(&[SharedValue], &[SharedValue])],
) -> Result<SharedVector, MpcError> {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (a, b) in pairs {
        if a.len() != b.len() {
            return Err(MpcError::LengthMismatch(a.len(), b.len()));
        }
        lhs.extend_from_slice(a);
        rhs.extend_from_slice(b);
    }
    let prod = s.mul_batch(&lhs, &rhs)?;
    let mut offset = 0;
    Ok(pairs
        .iter()
        .map(|(a, _)| {
            let v = prod[offset..offset + a.len()].iter().fold(s.zero(), |acc, &p| acc + p);
            offset += a.len();
            v
        })
        .collect())
}

/// `V(i)` for a secret 1-based `i`; 0 when `i = 0`.
pub fn vec_read(s: &mut Session, v: &[SharedValue], i: SharedValue) -> Result<SharedValue, MpcError> {
    let ind = index_vector(s, i, v.len())?;
    vec_read_with(s, v, &ind)
}

pub fn vec_read_with(s: &mut Session, v: &[SharedValue], ind: &[SharedValue]) -> Result<SharedValue, MpcError> {
    Ok(inner_product(s, &[(ind, v)])?[0])
}

/// `V` with position `i` replaced by `x`; unchanged when `i = 0`.
pub fn vec_write(s: &mut Session, v: &SharedVector, i: SharedValue, x: SharedValue) -> Result<SharedVector, MpcError> {
    let ind = index_vector(s, i, v.len())?;
    vec_write_with(s, v, &ind, x)
}

/// `V(j) <- I(j) ? x : V(j)` for every `j`.
pub fn vec_write_with(
    s: &mut Session,
    v: &[SharedValue],
    ind: &[SharedValue],
    x: SharedValue,
) -> Result<SharedVector, MpcError> {
    let xs = vec![x; v.len()];
    select_batch(s, ind, &xs, v)
}
