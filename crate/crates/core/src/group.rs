//! Bilinear group contract and the transparent (insecure) test backend.

use std::fmt::Debug;

use rand::RngCore;

use crate::crypto;
use crate::field::{Field, Fp};

/// A prime-order bilinear group `e: G × G → GT`.
///
/// Group operations are written multiplicatively. Implementations must be
/// deterministic: all randomness comes from the passed generator.
pub trait BilinearGroup: Clone + Debug + PartialEq + Eq {
    type Scalar: Field;
    type G: Clone + Eq + Debug;
    type Gt: Clone + Eq + Debug;

    /// Wire identifier: 0x00 transparent, 0x01 reserved.
    fn backend_id(&self) -> u8;

    fn generator(&self) -> Self::G;
    fn g_mul(&self, a: &Self::G, b: &Self::G) -> Self::G;
    fn g_exp(&self, a: &Self::G, e: &Self::Scalar) -> Self::G;

    fn pair(&self, a: &Self::G, b: &Self::G) -> Self::Gt;
    fn gt_identity(&self) -> Self::Gt;
    fn gt_mul(&self, a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_exp(&self, a: &Self::Gt, e: &Self::Scalar) -> Self::Gt;
    fn gt_inverse(&self, a: &Self::Gt) -> Self::Gt;

    fn hash_to_g(&self, data: &[u8]) -> Self::G;

    fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Scalar {
        Self::Scalar::random(rng)
    }

    fn random_gt<R: RngCore + ?Sized>(&self, rng: &mut R) -> Self::Gt {
        let g = self.generator();
        self.gt_exp(&self.pair(&g, &g), &self.random_scalar(rng))
    }

    fn gt_div(&self, a: &Self::Gt, b: &Self::Gt) -> Self::Gt {
        self.gt_mul(a, &self.gt_inverse(b))
    }

    fn encode_scalar(&self, s: &Self::Scalar) -> Vec<u8>;
    fn decode_scalar(&self, bytes: &[u8]) -> Option<Self::Scalar>;
    fn encode_g(&self, g: &Self::G) -> Vec<u8>;
    fn decode_g(&self, bytes: &[u8]) -> Option<Self::G>;
    fn encode_gt(&self, g: &Self::Gt) -> Vec<u8>;
    fn decode_gt(&self, bytes: &[u8]) -> Option<Self::Gt>;
}

/// 2^61 − 1, a Mersenne prime.
pub const TRANSPARENT_PRIME: u64 = (1u64 << 61) - 1;
pub type Scalar61 = Fp<TRANSPARENT_PRIME>;

/// Every transparent-group serialization starts with this tag, followed by
/// one kind byte and the discrete log as a big-endian u64.
pub const TRANSPARENT_MAGIC: &[u8; 4] = b"XPAR";
const KIND_SCALAR: u8 = b'S';
const KIND_G: u8 = b'G';
const KIND_GT: u8 = b'T';
const ENCODED_LEN: usize = 13;
pub const TRANSPARENT_BACKEND_ID: u8 = 0x00;

/// Source-group element represented by its discrete log to base `g`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct TransparentG(pub Scalar61);

/// Target-group element represented by its discrete log to base `e(g, g)`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct TransparentGt(pub Scalar61);

/// Discrete-log-transparent pairing group of order 2^61 − 1.
///
/// INSECURE: every element is its own discrete logarithm and the pairing is
/// multiplication of exponents. It exists so that every algebraic identity
/// of the scheme can be checked by direct arithmetic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransparentGroup;

fn encode_tagged(kind: u8, v: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(ENCODED_LEN);
    out.extend_from_slice(TRANSPARENT_MAGIC);
    out.push(kind);
    out.extend_from_slice(&v.to_be_bytes());
    out
}

fn decode_tagged(kind: u8, bytes: &[u8]) -> Option<Scalar61> {
    if bytes.len() != ENCODED_LEN || &bytes[..4] != TRANSPARENT_MAGIC || bytes[4] != kind {
        return None;
    }
    let v = u64::from_be_bytes(bytes[5..].try_into().ok()?);
    (v < TRANSPARENT_PRIME).then(|| Scalar61::new(v))
}

impl BilinearGroup for TransparentGroup {
    type Scalar = Scalar61;
    type G = TransparentG;
    type Gt = TransparentGt;

    fn backend_id(&self) -> u8 {
        TRANSPARENT_BACKEND_ID
    }

    fn generator(&self) -> TransparentG {
        TransparentG(Scalar61::one())
    }

    fn g_mul(&self, a: &TransparentG, b: &TransparentG) -> TransparentG {
        TransparentG(a.0 + b.0)
    }

    fn g_exp(&self, a: &TransparentG, e: &Scalar61) -> TransparentG {
        TransparentG(a.0 * *e)
    }

    fn pair(&self, a: &TransparentG, b: &TransparentG) -> TransparentGt {
        TransparentGt(a.0 * b.0)
    }

    fn gt_identity(&self) -> TransparentGt {
        TransparentGt(Scalar61::zero())
    }

    fn gt_mul(&self, a: &TransparentGt, b: &TransparentGt) -> TransparentGt {
        TransparentGt(a.0 + b.0)
    }

    fn gt_exp(&self, a: &TransparentGt, e: &Scalar61) -> TransparentGt {
        TransparentGt(a.0 * *e)
    }

    fn gt_inverse(&self, a: &TransparentGt) -> TransparentGt {
        TransparentGt(-a.0)
    }

    fn hash_to_g(&self, data: &[u8]) -> TransparentG {
        TransparentG(Scalar61::from_be_bytes_reduced(&crypto::hash(data).0))
    }

    fn encode_scalar(&self, s: &Scalar61) -> Vec<u8> {
        encode_tagged(KIND_SCALAR, s.value())
    }

    fn decode_scalar(&self, bytes: &[u8]) -> Option<Scalar61> {
        decode_tagged(KIND_SCALAR, bytes)
    }

    fn encode_g(&self, g: &TransparentG) -> Vec<u8> {
        encode_tagged(KIND_G, g.0.value())
    }

    fn decode_g(&self, bytes: &[u8]) -> Option<TransparentG> {
        decode_tagged(KIND_G, bytes).map(TransparentG)
    }

    fn encode_gt(&self, g: &TransparentGt) -> Vec<u8> {
        encode_tagged(KIND_GT, g.0.value())
    }

    fn decode_gt(&self, bytes: &[u8]) -> Option<TransparentGt> {
        decode_tagged(KIND_GT, bytes).map(TransparentGt)
    }
}
