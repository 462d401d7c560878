//! Bounded-domain comparison and equality.
//!
//! Operands are signed integers with magnitude below `2^k` (`k` =
//! [`ComparisonParams::bound_bits`]). A difference is masked with shared
//! random bits plus a statistically hiding high mask, opened, and the
//! result is recovered from the public low bits and the shared mask bits.
//! Round count is constant in the batch size; communication is linear.

use crate::field::FieldElement;
use crate::shamir::SharingParams;

use super::ops::and_all;
use super::{MpcError, Session, SharedValue, SharedVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonParams {
    /// Operands satisfy `|x| < 2^bound_bits`.
    pub bound_bits: u32,
    /// Statistical security parameter of the high mask.
    pub statistical_bits: u32,
}

impl Default for ComparisonParams {
    fn default() -> Self {
        Self {
            bound_bits: 16,
            statistical_bits: 40,
        }
    }
}

impl ComparisonParams {
    /// The masked values must never wrap around the modulus.
    pub fn validate(&self, params: &SharingParams) -> Result<(), MpcError> {
        let exp = self.bound_bits + 2 + self.statistical_bits;
        let worst = if exp >= 120 {
            u128::MAX
        } else {
            (params.threshold() as u128 + 2) << exp
        };
        if worst >= params.prime() as u128 {
            return Err(MpcError::Config(format!(
                "prime {} too small for {}-bit comparisons with {} bits of statistical masking",
                params.prime(),
                self.bound_bits,
                self.statistical_bits
            )));
        }
        Ok(())
    }
}

fn pow2(s: &Session, e: u32) -> FieldElement {
    s.element(1u64 << e)
}

/// `[d == 0]` for each `d` with `|d| < 2^(k+1)`.
pub fn eqz_batch(s: &mut Session, ds: &[SharedValue]) -> Result<SharedVector, MpcError> {
    let count = ds.len();
    if count == 0 {
        return Ok(SharedVector::default());
    }
    let cp = *s.comparison();
    let m = cp.bound_bits + 1;
    let mw = m as usize;
    let (bits, masks) = s.random_bits_and_masks(count * mw, count, cp.statistical_bits)?;

    let offset = pow2(s, m);
    let masked: Vec<SharedValue> = ds
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let low = bits[i * mw..(i + 1) * mw]
                .iter()
                .enumerate()
                .fold(s.zero(), |acc, (j, &b)| acc + b * pow2(s, j as u32));
            (d + low + masks[i] * offset).add_public(offset)
        })
        .collect();
    let opened = s.open_batch(&masked)?;

    let one = s.constant(1);
    let groups: Vec<Vec<SharedValue>> = opened
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let low = c.value() & ((1u64 << m) - 1);
            (0..mw)
                .map(|j| {
                    let b = bits[i * mw + j];
                    if (low >> j) & 1 == 1 {
                        b
                    } else {
                        one - b
                    }
                })
                .collect()
        })
        .collect();
    and_all(s, groups)
}

pub fn eq_batch(s: &mut Session, xs: &[SharedValue], ys: &[SharedValue]) -> Result<SharedVector, MpcError> {
    if xs.len() != ys.len() {
        return Err(MpcError::LengthMismatch(xs.len(), ys.len()));
    }
    let ds: Vec<SharedValue> = xs.iter().zip(ys).map(|(&x, &y)| x - y).collect();
    eqz_batch(s, &ds)
}

pub fn neq_batch(s: &mut Session, xs: &[SharedValue], ys: &[SharedValue]) -> Result<SharedVector, MpcError> {
    let one = s.constant(1);
    Ok(eq_batch(s, xs, ys)?.iter().map(|&e| one - e).collect())
}

pub fn eq(s: &mut Session, x: SharedValue, y: SharedValue) -> Result<SharedValue, MpcError> {
    Ok(eq_batch(s, &[x], &[y])?[0])
}

pub fn neq(s: &mut Session, x: SharedValue, y: SharedValue) -> Result<SharedValue, MpcError> {
    Ok(neq_batch(s, &[x], &[y])?[0])
}

/// `[c < r]` for public `c` and shared bits of `r` (least significant first).
fn bit_lt_public(
    s: &mut Session,
    cs: &[u64],
    bits: &[SharedValue],
    width: usize,
) -> Result<SharedVector, MpcError> {
    let count = cs.len();
    let one = s.constant(1);
    // e_j = c_j xor r_j
    let mut f: Vec<SharedValue> = (0..count * width)
        .map(|idx| {
            let (i, j) = (idx / width, idx % width);
            let b = bits[idx];
            if (cs[i] >> j) & 1 == 1 {
                one - b
            } else {
                b
            }
        })
        .collect();
    // suffix OR towards the least significant bit
    let mut step = 1;
    while step < width {
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        let mut targets = Vec::new();
        for i in 0..count {
            for j in 0..width - step {
                targets.push(i * width + j);
                lhs.push(f[i * width + j]);
                rhs.push(f[i * width + j + step]);
            }
        }
        let prod = s.mul_batch(&lhs, &rhs)?;
        for (k, &t) in targets.iter().enumerate() {
            f[t] = lhs[k] + rhs[k] - prod[k];
        }
        step *= 2;
    }
    // one-hot marker of the most significant differing bit
    let g: Vec<SharedValue> = (0..count * width)
        .map(|idx| {
            if idx % width == width - 1 {
                f[idx]
            } else {
                f[idx] - f[idx + 1]
            }
        })
        .collect();
    let picked = s.mul_batch(&g, bits)?;
    Ok((0..count)
        .map(|i| picked[i * width..(i + 1) * width].iter().fold(s.zero(), |a, &b| a + b))
        .collect())
}

/// `[x < y]` over the signed encoding, for `|x|, |y| < 2^k`.
pub fn lt_batch(s: &mut Session, xs: &[SharedValue], ys: &[SharedValue]) -> Result<SharedVector, MpcError> {
    if xs.len() != ys.len() {
        return Err(MpcError::LengthMismatch(xs.len(), ys.len()));
    }
    let count = xs.len();
    if count == 0 {
        return Ok(SharedVector::default());
    }
    let cp = *s.comparison();
    let low_bits = cp.bound_bits + 1;
    let width = low_bits as usize;
    let (bits, masks) = s.random_bits_and_masks(count * width, count, cp.statistical_bits)?;

    let shift = pow2(s, low_bits);
    // a = x - y + 2^(k+1) lies in (0, 2^(k+2)); x < y iff its top bit is clear
    let a: Vec<SharedValue> = xs.iter().zip(ys).map(|(&x, &y)| (x - y).add_public(shift)).collect();
    let r_low: Vec<SharedValue> = (0..count)
        .map(|i| {
            bits[i * width..(i + 1) * width]
                .iter()
                .enumerate()
                .fold(s.zero(), |acc, (j, &b)| acc + b * pow2(s, j as u32))
        })
        .collect();
    let masked: Vec<SharedValue> = (0..count).map(|i| a[i] + r_low[i] + masks[i] * shift).collect();
    let opened = s.open_batch(&masked)?;
    let c_low: Vec<u64> = opened.iter().map(|c| c.value() & ((1u64 << low_bits) - 1)).collect();

    let borrow = bit_lt_public(s, &c_low, &bits, width)?;
    let inv_shift = shift.inverse().expect("power of two is invertible");
    let one = s.constant(1);
    Ok((0..count)
        .map(|i| {
            let a_low = (borrow[i] * shift - r_low[i]).add_public(s.element(c_low[i]));
            let msb = (a[i] - a_low) * inv_shift;
            one - msb
        })
        .collect())
}

pub fn lt(s: &mut Session, x: SharedValue, y: SharedValue) -> Result<SharedValue, MpcError> {
    Ok(lt_batch(s, &[x], &[y])?[0])
}
