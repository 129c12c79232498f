//! Threshold secret sharing over any prime field.
//!
//! Shares are points `(i, q(i))` of a random polynomial `q` with `q(0)`
//! equal to the secret; indices start at 1. Any `k` points recover `q(0)` by
//! Lagrange interpolation at zero.

use rand::RngCore;
use thiserror::Error;

use crate::field::Field;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SharingError {
    #[error("interpolation indices are not distinct")]
    DuplicateIndices,
    #[error("index is not a member of the interpolation set")]
    IndexNotInSet,
    #[error("threshold {threshold} invalid for {shares} shares")]
    BadThreshold { threshold: usize, shares: usize },
}

/// A polynomial stored low-degree first; `coefficients[0]` is `q(0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial<F> {
    coefficients: Vec<F>,
}

impl<F: Field> Polynomial<F> {
    /// Random polynomial of the given degree with `q(0) = constant`.
    pub fn random<R: RngCore + ?Sized>(constant: F, degree: usize, rng: &mut R) -> Self {
        let mut coefficients = Vec::with_capacity(degree + 1);
        coefficients.push(constant);
        coefficients.extend((0..degree).map(|_| F::random(rng)));
        Polynomial { coefficients }
    }

    pub fn from_coefficients(coefficients: Vec<F>) -> Self {
        Polynomial { coefficients }
    }

    pub fn evaluate(&self, x: F) -> F {
        self.coefficients.iter().rev().fold(F::zero(), |acc, &c| acc * x + c)
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }
}

/// Lagrange basis coefficient `Δ_{i,S}(0) = Π_{j∈S, j≠i} (0 − j)/(i − j)`.
pub fn lagrange_coefficient<F: Field>(i: F, set: &[F]) -> Result<F, SharingError> {
    for (a, x) in set.iter().enumerate() {
        if set[a + 1..].contains(x) {
            return Err(SharingError::DuplicateIndices);
        }
    }
    if !set.contains(&i) {
        return Err(SharingError::IndexNotInSet);
    }
    let mut num = F::one();
    let mut den = F::one();
    for &j in set.iter().filter(|&&j| j != i) {
        num = num * (-j);
        den = den * (i - j);
    }
    // den is non-zero because the indices are distinct.
    Ok(num * den.inverse().expect("distinct indices"))
}

/// Splits `secret` into `n` shares, any `threshold` of which reconstruct it.
pub fn split<F: Field, R: RngCore + ?Sized>(
    secret: F,
    threshold: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(F, F)>, SharingError> {
    if threshold == 0 || threshold > n {
        return Err(SharingError::BadThreshold { threshold, shares: n });
    }
    let poly = Polynomial::random(secret, threshold - 1, rng);
    Ok((1..=n as u64)
        .map(|i| {
            let x = F::from_u64(i);
            (x, poly.evaluate(x))
        })
        .collect())
}

/// Interpolates `q(0)` from the given points.
pub fn reconstruct<F: Field>(shares: &[(F, F)]) -> Result<F, SharingError> {
    let xs: Vec<F> = shares.iter().map(|s| s.0).collect();
    shares.iter().try_fold(F::zero(), |acc, &(x, y)| {
        Ok(acc + lagrange_coefficient(x, &xs)? * y)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Fp;
    use crate::group::Scalar61;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    type F = Scalar61;

    #[test]
    fn coefficient_examples() {
        let s = [F::from_u64(1), F::from_u64(2)];
        assert_eq!(lagrange_coefficient(s[0], &s).unwrap(), F::from_u64(2));
        assert_eq!(lagrange_coefficient(s[1], &s).unwrap(), -F::one());
        assert_eq!(
            lagrange_coefficient(s[1], &s).unwrap().value(),
            F::MODULUS - 1
        );
    }

    #[test]
    fn coefficient_errors() {
        let one = F::from_u64(1);
        assert_eq!(lagrange_coefficient(one, &[one, one]), Err(SharingError::DuplicateIndices));
        assert_eq!(lagrange_coefficient(F::from_u64(3), &[one]), Err(SharingError::IndexNotInSet));
    }

    // Oracle: evaluate the polynomial directly and compare with the weighted
    // sum of k evaluations at random distinct points.
    #[test]
    fn interpolation_recovers_constant_term() {
        let mut rng = ChaCha20Rng::seed_from_u64(100);
        for _ in 0..100 {
            let k = rng.gen_range(1..=6);
            let poly = Polynomial::random(F::random(&mut rng), k - 1, &mut rng);
            let mut xs: Vec<F> = Vec::new();
            while xs.len() < k {
                let x = F::from_u64(rng.gen_range(1..1_000_000));
                if !xs.contains(&x) {
                    xs.push(x);
                }
            }
            let sum = xs.iter().fold(F::zero(), |acc, &x| {
                acc + lagrange_coefficient(x, &xs).unwrap() * poly.evaluate(x)
            });
            assert_eq!(sum, poly.evaluate(F::zero()));
        }
    }

    #[test]
    fn split_and_reconstruct_small_field() {
        type S = Fp<101>;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let shares = split(S::from_u64(42), 3, 5, &mut rng).unwrap();
        assert_eq!(reconstruct(&shares[..3]).unwrap(), S::from_u64(42));
        assert_eq!(reconstruct(&shares[2..]).unwrap(), S::from_u64(42));
        assert!(split(S::from_u64(1), 0, 2, &mut rng).is_err());
        assert!(split(S::from_u64(1), 3, 2, &mut rng).is_err());
    }
}
