//! Prime-field arithmetic over `Z_p`.
//!
//! Every element carries its modulus so that shares, public constants and
//! decoded wire values can be combined without threading a field context
//! through every call site. Mixing moduli is a programming error and is
//! caught by debug assertions.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use thiserror::Error;

/// The Mersenne prime `2^61 - 1`.
pub const DEFAULT_PRIME: u64 = (1 << 61) - 1;

/// Size of one field element on the wire and in files.
pub const ELEMENT_BYTES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("value {value} is not reduced modulo {modulus}")]
    Unreduced { value: u64, modulus: u64 },
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    /// Reduces `value` modulo `modulus`.
    #[inline]
    pub fn new(value: u64, modulus: u64) -> Self {
        debug_assert!(modulus > 1);
        Self {
            value: value % modulus,
            modulus,
        }
    }

    /// Builds an element from an already-reduced value, rejecting anything `>= p`.
    pub fn from_reduced(value: u64, modulus: u64) -> Result<Self, FieldError> {
        if value >= modulus {
            return Err(FieldError::Unreduced { value, modulus });
        }
        Ok(Self { value, modulus })
    }

    #[inline]
    pub fn zero(modulus: u64) -> Self {
        Self { value: 0, modulus }
    }

    #[inline]
    pub fn one(modulus: u64) -> Self {
        Self { value: 1, modulus }
    }

    /// Signed encoding: `-x` maps to `p - x`.
    pub fn from_i64(v: i64, modulus: u64) -> Self {
        let m = modulus as i128;
        let r = (v as i128).rem_euclid(m);
        Self {
            value: r as u64,
            modulus,
        }
    }

    /// Inverse of [`FieldElement::from_i64`]: values above `p/2` decode as negatives.
    pub fn to_i64(self) -> i64 {
        if self.value > self.modulus / 2 {
            -((self.modulus - self.value) as i64)
        } else {
            self.value as i64
        }
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.value
    }

    #[inline]
    pub fn modulus(self) -> u64 {
        self.modulus
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = Self::one(self.modulus);
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base *= base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        if self.value == 0 {
            None
        } else {
            Some(self.pow(self.modulus - 2))
        }
    }

    pub fn to_le_bytes(self) -> [u8; ELEMENT_BYTES] {
        self.value.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: &[u8], modulus: u64) -> Result<Self, FieldError> {
        let raw: [u8; ELEMENT_BYTES] = bytes.try_into().map_err(|_| FieldError::Length {
            expected: ELEMENT_BYTES,
            got: bytes.len(),
        })?;
        Self::from_reduced(u64::from_le_bytes(raw), modulus)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for FieldElement {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.modulus, rhs.modulus);
        let s = self.value + rhs.value;
        Self {
            value: if s >= self.modulus { s - self.modulus } else { s },
            modulus: self.modulus,
        }
    }
}

impl Sub for FieldElement {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        debug_assert_eq!(self.modulus, rhs.modulus);
        let value = if self.value >= rhs.value {
            self.value - rhs.value
        } else {
            self.modulus - (rhs.value - self.value)
        };
        Self {
            value,
            modulus: self.modulus,
        }
    }
}

impl Mul for FieldElement {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        debug_assert_eq!(self.modulus, rhs.modulus);
        let prod = self.value as u128 * rhs.value as u128;
        let value = if self.modulus == DEFAULT_PRIME {
            reduce_mersenne61(prod)
        } else {
            (prod % self.modulus as u128) as u64
        };
        Self {
            value,
            modulus: self.modulus,
        }
    }
}

impl Neg for FieldElement {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        if self.value == 0 {
            self
        } else {
            Self {
                value: self.modulus - self.value,
                modulus: self.modulus,
            }
        }
    }
}

impl AddAssign for FieldElement {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

#[inline]
fn reduce_mersenne61(x: u128) -> u64 {
    let p = DEFAULT_PRIME as u128;
    let folded = (x & p) + (x >> 61);
    let folded = (folded & p) + (folded >> 61);
    let v = folded as u64;
    if v >= DEFAULT_PRIME {
        v - DEFAULT_PRIME
    } else {
        v
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Validates a user-supplied modulus.
pub fn check_prime(p: u64) -> Result<u64, FieldError> {
    if is_prime(p) {
        Ok(p)
    } else {
        Err(FieldError::NotPrime(p))
    }
}
