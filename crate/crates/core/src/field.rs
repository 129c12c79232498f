//! Prime-field scalars.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use rand::{Rng, RngCore};

/// Arithmetic needed by the secret-sharing and ABE layers.
pub trait Field:
    Copy
    + Eq
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(v: u64) -> Self;
    /// Multiplicative inverse; `None` for zero.
    fn inverse(&self) -> Option<Self>;
    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }
}

/// Element of the prime field of order `P` (`P` must be prime and below 2^63).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fp<const P: u64>(u64);

impl<const P: u64> Fp<P> {
    pub const MODULUS: u64 = P;

    pub fn new(v: u64) -> Self {
        Fp(v % P)
    }

    /// Reduces a big-endian byte string of any length modulo `P`.
    pub fn from_be_bytes_reduced(bytes: &[u8]) -> Self {
        let acc = bytes
            .iter()
            .fold(0u128, |acc, &b| ((acc << 8) | b as u128) % P as u128);
        Fp(acc as u64)
    }

    pub fn value(&self) -> u64 {
        self.0
    }

    pub fn pow(&self, mut exp: u64) -> Self {
        let mut base = *self;
        let mut acc = Fp(1 % P);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }
}

impl<const P: u64> Debug for Fp<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fp({})", self.0)
    }
}

impl<const P: u64> Add for Fp<P> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Fp(((self.0 as u128 + rhs.0 as u128) % P as u128) as u64)
    }
}

impl<const P: u64> Sub for Fp<P> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Fp(((self.0 as u128 + P as u128 - rhs.0 as u128) % P as u128) as u64)
    }
}

impl<const P: u64> Mul for Fp<P> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Fp(((self.0 as u128 * rhs.0 as u128) % P as u128) as u64)
    }
}

impl<const P: u64> Neg for Fp<P> {
    type Output = Self;
    fn neg(self) -> Self {
        Fp((P - self.0) % P)
    }
}

impl<const P: u64> Field for Fp<P> {
    fn zero() -> Self {
        Fp(0)
    }

    fn one() -> Self {
        Fp(1 % P)
    }

    fn from_u64(v: u64) -> Self {
        Fp::new(v)
    }

    fn inverse(&self) -> Option<Self> {
        // Fermat: a^(p-2)
        if self.0 == 0 {
            None
        } else {
            Some(self.pow(P - 2))
        }
    }

    fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.gen_range(0..P))
    }
}
