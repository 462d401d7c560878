//! Shamir `(t, n)` threshold secret sharing.
//!
//! Shares are evaluations of a random degree-`t` polynomial at the party
//! indices `1..=n`; the secret is the constant term. Each [`Share`] carries
//! its evaluation point, so reconstruction never depends on slice order.

use rand::Rng;
use thiserror::Error;

use crate::field::{self, FieldElement, FieldError, DEFAULT_PRIME};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShamirError {
    #[error("threshold {t} must satisfy 0 < t < n = {n}")]
    Threshold { t: usize, n: usize },
    #[error("prime {p} must exceed the number of parties {n}")]
    PrimeTooSmall { p: u64, n: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("need at least {needed} shares, got {got}")]
    TooFewShares { needed: usize, got: usize },
    #[error("duplicate share for party {0}")]
    DuplicateParty(usize),
    #[error("party index {0} outside 1..=n")]
    BadParty(usize),
    #[error("shares do not lie on a polynomial of degree <= {0}")]
    Inconsistent(usize),
    #[error("shares belong to different parties")]
    MixedParties,
    #[error("{coeffs} coefficients for {shares} shares")]
    ArityMismatch { coeffs: usize, shares: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharingParams {
    threshold: usize,
    parties: usize,
    prime: u64,
}

impl SharingParams {
    pub fn new(threshold: usize, parties: usize, prime: u64) -> Result<Self, ShamirError> {
        if threshold == 0 || threshold >= parties {
            return Err(ShamirError::Threshold {
                t: threshold,
                n: parties,
            });
        }
        if prime <= parties as u64 {
            return Err(ShamirError::PrimeTooSmall {
                p: prime,
                n: parties,
            });
        }
        field::check_prime(prime)?;
        Ok(Self {
            threshold,
            parties,
            prime,
        })
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn element(&self, v: u64) -> FieldElement {
        FieldElement::new(v, self.prime)
    }
}

impl Default for SharingParams {
    /// Three computing peers tolerating one semi-honest corruption.
    fn default() -> Self {
        Self {
            threshold: 1,
            parties: 3,
            prime: DEFAULT_PRIME,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    pub party: usize,
    pub value: FieldElement,
}

impl Share {
    pub fn new(party: usize, value: FieldElement) -> Self {
        Self { party, value }
    }
}

/// Horner evaluation of `coeffs[0] + coeffs[1] X + ...`.
pub fn eval_poly(coeffs: &[FieldElement], x: FieldElement) -> FieldElement {
    coeffs
        .iter()
        .rev()
        .fold(FieldElement::zero(x.modulus()), |acc, &c| acc * x + c)
}

/// Shares `secret` with a uniformly random degree-`t` polynomial.
pub fn share<R: Rng + ?Sized>(
    secret: FieldElement,
    params: &SharingParams,
    rng: &mut R,
) -> Vec<Share> {
    let p = params.prime;
    let mut coeffs = Vec::with_capacity(params.threshold + 1);
    coeffs.push(secret);
    for _ in 0..params.threshold {
        coeffs.push(FieldElement::new(rng.gen_range(0..p), p));
    }
    share_with_polynomial(&coeffs, params)
}

/// Shares with caller-chosen coefficients; `coeffs[0]` is the secret.
pub fn share_with_polynomial(coeffs: &[FieldElement], params: &SharingParams) -> Vec<Share> {
    (1..=params.parties)
        .map(|i| Share::new(i, eval_poly(coeffs, params.element(i as u64))))
        .collect()
}

/// Lagrange coefficients for interpolating at zero from the given points.
pub fn lagrange_at_zero(points: &[usize], prime: u64) -> Vec<FieldElement> {
    points
        .iter()
        .map(|&i| {
            let xi = FieldElement::new(i as u64, prime);
            let mut num = FieldElement::one(prime);
            let mut den = FieldElement::one(prime);
            for &j in points {
                if j != i {
                    let xj = FieldElement::new(j as u64, prime);
                    num *= -xj;
                    den *= xi - xj;
                }
            }
            num * den.inverse().expect("distinct evaluation points")
        })
        .collect()
}

fn check_parties(shares: &[Share], params: &SharingParams) -> Result<(), ShamirError> {
    let mut seen = vec![false; params.parties + 1];
    for s in shares {
        if s.party == 0 || s.party > params.parties {
            return Err(ShamirError::BadParty(s.party));
        }
        if std::mem::replace(&mut seen[s.party], true) {
            return Err(ShamirError::DuplicateParty(s.party));
        }
    }
    Ok(())
}

/// Lagrange interpolation at zero.
///
/// Uses the first `t + 1` shares; any further shares must lie on the same
/// polynomial or [`ShamirError::Inconsistent`] is returned.
pub fn reconstruct(shares: &[Share], params: &SharingParams) -> Result<FieldElement, ShamirError> {
    let needed = params.threshold + 1;
    if shares.len() < needed {
        return Err(ShamirError::TooFewShares {
            needed,
            got: shares.len(),
        });
    }
    check_parties(shares, params)?;
    let base = &shares[..needed];
    let points: Vec<usize> = base.iter().map(|s| s.party).collect();
    let secret = lagrange_at_zero(&points, params.prime)
        .into_iter()
        .zip(base)
        .fold(FieldElement::zero(params.prime), |acc, (l, s)| acc + l * s.value);

    for extra in &shares[needed..] {
        if interpolate_at(base, extra.party, params.prime) != extra.value {
            return Err(ShamirError::Inconsistent(params.threshold));
        }
    }
    Ok(secret)
}

fn interpolate_at(base: &[Share], at: usize, prime: u64) -> FieldElement {
    let x = FieldElement::new(at as u64, prime);
    let mut acc = FieldElement::zero(prime);
    for (k, sk) in base.iter().enumerate() {
        let xk = FieldElement::new(sk.party as u64, prime);
        let mut basis = FieldElement::one(prime);
        for (j, sj) in base.iter().enumerate() {
            if j != k {
                let xj = FieldElement::new(sj.party as u64, prime);
                basis *= (x - xj) * (xk - xj).inverse().expect("distinct points");
            }
        }
        acc += basis * sk.value;
    }
    acc
}

/// `sum(coeffs[i] * shares[i]) + constant`, evaluated locally by one party.
pub fn local_linear(
    coeffs: &[FieldElement],
    shares: &[Share],
    constant: FieldElement,
) -> Result<Share, ShamirError> {
    if coeffs.len() != shares.len() {
        return Err(ShamirError::ArityMismatch {
            coeffs: coeffs.len(),
            shares: shares.len(),
        });
    }
    let Some(first) = shares.first() else {
        return Err(ShamirError::TooFewShares { needed: 1, got: 0 });
    };
    if shares.iter().any(|s| s.party != first.party) {
        return Err(ShamirError::MixedParties);
    }
    let value = coeffs
        .iter()
        .zip(shares)
        .fold(constant, |acc, (&c, s)| acc + c * s.value);
    Ok(Share::new(first.party, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn small() -> SharingParams {
        SharingParams::new(1, 3, 101).unwrap()
    }

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v, 101)
    }

    #[test]
    fn fixed_polynomial_shares() {
        let shares = share_with_polynomial(&[fe(42), fe(7)], &small());
        let got: Vec<(usize, u64)> = shares.iter().map(|s| (s.party, s.value.value())).collect();
        assert_eq!(got, vec![(1, 49), (2, 56), (3, 63)]);
    }

    #[test]
    fn zero_polynomial() {
        let shares = share_with_polynomial(&[fe(0), fe(0)], &small());
        assert!(shares.iter().all(|s| s.value.is_zero()));
        assert_eq!(reconstruct(&shares, &small()).unwrap(), fe(0));
    }

    #[test]
    fn reconstruct_from_two() {
        let shares = [Share::new(1, fe(49)), Share::new(2, fe(56))];
        assert_eq!(reconstruct(&shares, &small()).unwrap(), fe(42));
        // order does not matter
        let shares = [Share::new(3, fe(63)), Share::new(1, fe(49))];
        assert_eq!(reconstruct(&shares, &small()).unwrap(), fe(42));
    }

    #[test]
    fn reconstruct_errors() {
        let p = small();
        assert_eq!(
            reconstruct(&[Share::new(1, fe(49))], &p),
            Err(ShamirError::TooFewShares { needed: 2, got: 1 })
        );
        assert_eq!(
            reconstruct(&[Share::new(1, fe(49)), Share::new(1, fe(49))], &p),
            Err(ShamirError::DuplicateParty(1))
        );
        let off = [Share::new(1, fe(49)), Share::new(2, fe(56)), Share::new(3, fe(64))];
        assert_eq!(reconstruct(&off, &p), Err(ShamirError::Inconsistent(1)));
        assert!(matches!(
            reconstruct(&[Share::new(0, fe(1)), Share::new(2, fe(1))], &p),
            Err(ShamirError::BadParty(0))
        ));
    }

    #[test]
    fn invalid_params() {
        assert!(matches!(SharingParams::new(3, 3, 101), Err(ShamirError::Threshold { .. })));
        assert!(matches!(SharingParams::new(0, 3, 101), Err(ShamirError::Threshold { .. })));
        assert!(matches!(SharingParams::new(1, 3, 3), Err(ShamirError::PrimeTooSmall { .. })));
        assert!(matches!(SharingParams::new(1, 3, 100), Err(ShamirError::Field(_))));
    }

    #[test]
    fn linear_combination_examples() {
        let p = small();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = share(fe(5), &p, &mut rng);
        let y = share(fe(3), &p, &mut rng);
        let out: Vec<Share> = (0..3)
            .map(|i| local_linear(&[fe(2), fe(1)], &[x[i], y[i]], fe(0)).unwrap())
            .collect();
        assert_eq!(reconstruct(&out, &p).unwrap(), fe(13));

        let out: Vec<Share> = (0..3)
            .map(|i| local_linear(&[fe(0), fe(0)], &[x[i], y[i]], fe(9)).unwrap())
            .collect();
        assert_eq!(reconstruct(&out, &p).unwrap(), fe(9));

        assert_eq!(
            local_linear(&[fe(1), fe(1)], &[x[0], y[1]], fe(0)),
            Err(ShamirError::MixedParties)
        );
    }

    #[test]
    fn roundtrip_ten_thousand() {
        let p = SharingParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x = p.element(rng.gen());
            let shares = share(x, &p, &mut rng);
            assert_eq!(reconstruct(&shares, &p).unwrap(), x);
        }
    }

    #[test]
    fn single_share_is_uniform() {
        let p = small();
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let mut counts = [0u64; 101];
        let samples = 100_000;
        for _ in 0..samples {
            counts[share(fe(42), &p, &mut rng)[0].value.value() as usize] += 1;
        }
        let expected = samples as f64 / 101.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let critical = ChiSquared::new(100.0).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "chi-square {stat} >= {critical}");
    }

    proptest! {
        #[test]
        fn linearity(x in 0u64..101, y in 0u64..101, a in 0u64..101, b in 0u64..101, c in 0u64..101, seed: u64) {
            let p = small();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let xs = share(fe(x), &p, &mut rng);
            let ys = share(fe(y), &p, &mut rng);
            let out: Vec<Share> = (0..3)
                .map(|i| local_linear(&[fe(a), fe(b)], &[xs[i], ys[i]], fe(c)).unwrap())
                .collect();
            prop_assert_eq!(reconstruct(&out, &p).unwrap(), fe((a * x + b * y + c) % 101));
        }

        #[test]
        fn any_threshold_roundtrip(n in 2usize..8, seed: u64, x in 0u64..DEFAULT_PRIME) {
            let t = 1 + (seed as usize % (n - 1));
            let p = SharingParams::new(t, n, DEFAULT_PRIME).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let shares = share(p.element(x), &p, &mut rng);
            prop_assert_eq!(reconstruct(&shares, &p).unwrap(), p.element(x));
            prop_assert_eq!(reconstruct(&shares[n - t - 1..], &p).unwrap(), p.element(x));
        }
    }
}
