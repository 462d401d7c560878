//! Semi-honest Shamir MPC engine.
//!
//! A [`Session`] is one computing peer's view of a protocol run. Secret
//! values are [`SharedValue`] handles holding this peer's share; linear
//! operations on them are local, everything else goes through the session
//! and costs communication rounds, which are tallied in [`TraceStats`].

use std::ops::{Add, AddAssign, Deref, DerefMut, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::field::FieldElement;
use crate::net::NetError;
use crate::shamir::ShamirError;

mod compare;
mod harness;
mod matrix;
mod ops;
mod queue;
mod session;

pub use compare::{eq, eq_batch, eqz_batch, lt, lt_batch, neq, neq_batch, ComparisonParams};
pub use harness::{run_local, LocalConfig};
pub use matrix::{matmul, shuffle_matrix, unshuffle_matrix, verify_permutation, PermutationHandle, SharedMatrix};
pub use ops::{
    and_all, index_vector, index_vectors, index_vectors_sized, inner_product, or, select, select_batch, vec_read, vec_read_with,
    vec_write, vec_write_with,
};
pub use queue::ObliviousQueue;
pub use session::{Session, SessionConfig, TraceStats};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Shamir(#[from] ShamirError),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("oblivious queue capacity {0} exceeded")]
    QueueCapacity(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contributed matrix is not a permutation matrix")]
    InvalidPermutation,
    #[error("peer thread panicked")]
    PeerPanic,
}

/// This peer's share of a secret field element.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SharedValue(FieldElement);

impl std::fmt::Debug for SharedValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}]", self.0)
    }
}

impl SharedValue {
    /// Wraps a raw share. Only meaningful if the other peers hold matching shares.
    pub fn from_share(share: FieldElement) -> Self {
        Self(share)
    }

    /// The raw share held by this peer.
    pub fn share(self) -> FieldElement {
        self.0
    }

    pub fn add_public(self, c: FieldElement) -> Self {
        Self(self.0 + c)
    }

    pub fn modulus(self) -> u64 {
        self.0.modulus()
    }
}

impl Add for SharedValue {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for SharedValue {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Neg for SharedValue {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Mul<FieldElement> for SharedValue {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: FieldElement) -> Self {
        Self(self.0 * rhs)
    }
}

impl AddAssign for SharedValue {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl SubAssign for SharedValue {
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

/// Dense vector of shares with a public length.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SharedVector(Vec<SharedValue>);

impl SharedVector {
    pub fn new(values: Vec<SharedValue>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<SharedValue> {
        self.0
    }

    pub fn shares(&self) -> Vec<FieldElement> {
        self.0.iter().map(|v| v.share()).collect()
    }

    pub fn sum(&self, modulus: u64) -> SharedValue {
        self.0
            .iter()
            .fold(SharedValue(FieldElement::zero(modulus)), |a, &b| a + b)
    }
}

impl Deref for SharedVector {
    type Target = Vec<SharedValue>;
    fn deref(&self) -> &Vec<SharedValue> {
        &self.0
    }
}

impl DerefMut for SharedVector {
    fn deref_mut(&mut self) -> &mut Vec<SharedValue> {
        &mut self.0
    }
}

impl From<Vec<SharedValue>> for SharedVector {
    fn from(v: Vec<SharedValue>) -> Self {
        Self(v)
    }
}

impl FromIterator<SharedValue> for SharedVector {
    fn from_iter<I: IntoIterator<Item = SharedValue>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
