//! Shared matrices and the joint random shuffle of node labels.
//!
//! Several peers each contribute a secret permutation matrix; the graph is
//! relabeled by all of them in turn, so no coalition of fewer than the
//! contributors learns the combined permutation.

use rand::seq::SliceRandom;

use crate::field::FieldElement;
use crate::net::PeerId;

use super::ops::{index_vectors, inner_product};
use super::{MpcError, Session, SharedValue, SharedVector};

/// Row-major matrix of shared values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedMatrix {
    rows: usize,
    cols: usize,
    data: Vec<SharedValue>,
}

impl SharedMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<SharedValue>) -> Result<Self, MpcError> {
        if data.len() != rows * cols {
            return Err(MpcError::LengthMismatch(data.len(), rows * cols));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> SharedValue {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[SharedValue] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[SharedValue] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let data = (0..self.cols)
            .flat_map(|c| (0..self.rows).map(move |r| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// Matrix product, all `rows * inner * cols` multiplications in one round.
pub fn matmul(s: &mut Session, a: &SharedMatrix, b: &SharedMatrix) -> Result<SharedMatrix, MpcError> {
    if a.cols != b.rows {
        return Err(MpcError::LengthMismatch(a.cols, b.rows));
    }
    let bt = b.transpose();
    let pairs: Vec<(&[SharedValue], &[SharedValue])> = (0..a.rows)
        .flat_map(|r| (0..b.cols).map(move |c| (r, c)))
        .map(|(r, c)| (a.row(r), bt.row(c)))
        .collect();
    let data = inner_product(s, &pairs)?.into_inner();
    SharedMatrix::new(a.rows, b.cols, data)
}

/// Matrix-vector product in one round.
fn matvec(s: &mut Session, a: &SharedMatrix, v: &[SharedValue]) -> Result<SharedVector, MpcError> {
    if a.cols != v.len() {
        return Err(MpcError::LengthMismatch(a.cols, v.len()));
    }
    let pairs: Vec<(&[SharedValue], &[SharedValue])> = (0..a.rows).map(|r| (a.row(r), v)).collect();
    inner_product(s, &pairs)
}

/// The secret permutation matrices contributed for one run.
#[derive(Debug, Clone)]
pub struct PermutationHandle {
    size: usize,
    matrices: Vec<SharedMatrix>,
}

impl PermutationHandle {
    /// Peers `1..=floor(n/2)+1`: a strict majority, so no coalition of `t`
    /// peers covers all contributions.
    pub fn contributors(s: &Session) -> Vec<PeerId> {
        (1..=(s.parties() / 2 + 1) as PeerId).collect()
    }

    /// Every contributor samples a uniform permutation locally and inputs it.
    pub fn random(s: &mut Session, size: usize) -> Result<Self, MpcError> {
        let mine = if Self::contributors(s).contains(&s.me()) {
            let mut perm: Vec<usize> = (0..size).collect();
            perm.shuffle(s.rng());
            Some(permutation_matrix(s, &perm))
        } else {
            None
        };
        Self::from_inputs(s, mine.as_deref(), size)
    }

    /// Inputs raw row-major `size x size` matrices, one per contributor. Not
    /// checked; see [`verify_permutation`].
    pub fn from_inputs(s: &mut Session, mine: Option<&[FieldElement]>, size: usize) -> Result<Self, MpcError> {
        let contributors = Self::contributors(s);
        let inputs = s.input(&contributors, mine, size * size)?;
        let matrices = inputs
            .into_iter()
            .map(|v| SharedMatrix::new(size, size, v.into_inner()))
            .collect::<Result<_, _>>()?;
        Ok(Self { size, matrices })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn matrices(&self) -> &[SharedMatrix] {
        &self.matrices
    }
}

/// Row-major matrix with `P(i, perm[i]) = 1`.
pub(crate) fn permutation_matrix(s: &Session, perm: &[usize]) -> Vec<FieldElement> {
    let n = perm.len();
    let mut m = vec![s.element(0); n * n];
    for (i, &j) in perm.iter().enumerate() {
        m[i * n + j] = s.element(1);
    }
    m
}

/// Checks that a shared matrix is a permutation matrix.
///
/// Opens `e(e - 1)` for every entry and every row and column sum minus one.
/// All are 0 for a valid matrix, so nothing about it is revealed.
pub fn verify_permutation(s: &mut Session, p: &SharedMatrix) -> Result<(), MpcError> {
    if p.rows != p.cols {
        return Err(MpcError::InvalidPermutation);
    }
    let n = p.rows;
    let minus_one = -s.element(1);
    let booleanity = s.mul_batch(&p.data, &p.data.iter().map(|&e| e.add_public(minus_one)).collect::<Vec<_>>())?;
    let mut checks: Vec<SharedValue> = booleanity.into_inner();
    for r in 0..n {
        checks.push(p.row(r).iter().fold(s.zero(), |a, &b| a + b).add_public(minus_one));
    }
    for c in 0..n {
        checks.push((0..n).fold(s.zero(), |a, r| a + p.get(r, c)).add_public(minus_one));
    }
    let opened = s.open_batch(&checks)?;
    if opened.iter().all(|v| v.is_zero()) {
        Ok(())
    } else {
        Err(MpcError::InvalidPermutation)
    }
}

/// `A <- P A P^T` for every contributed `P`, in contribution order.
pub fn shuffle_matrix(s: &mut Session, h: &PermutationHandle, a: &SharedMatrix) -> Result<SharedMatrix, MpcError> {
    let mut cur = a.clone();
    for p in &h.matrices {
        let pa = matmul(s, p, &cur)?;
        cur = matmul(s, &pa, &p.transpose())?;
    }
    Ok(cur)
}

/// Maps a matching on shuffled labels back to the original labels.
///
/// `m(i)` is the partner of node `i` (1-based) or 0. Undoing each `P` in
/// reverse order moves the entries with `P^T` and relabels the values through
/// `sigma(j) = sum_k k * P(j, k)`.
pub fn unshuffle_matrix(s: &mut Session, h: &PermutationHandle, m: &[SharedValue]) -> Result<SharedVector, MpcError> {
    if m.len() != h.size {
        return Err(MpcError::LengthMismatch(m.len(), h.size));
    }
    let mut cur = SharedVector::new(m.to_vec());
    for p in h.matrices.iter().rev() {
        let sigma: Vec<SharedValue> = (0..h.size)
            .map(|j| {
                p.row(j)
                    .iter()
                    .enumerate()
                    .fold(s.zero(), |acc, (k, &e)| acc + e * s.element(k as u64 + 1))
            })
            .collect();
        let moved = matvec(s, &p.transpose(), &cur)?;
        let inds = index_vectors(s, &moved, h.size)?;
        let pairs: Vec<(&[SharedValue], &[SharedValue])> = inds.iter().map(|i| (i.as_slice(), sigma.as_slice())).collect();
        cur = inner_product(s, &pairs)?;
    }
    Ok(cur)
}
