//! Ciphertext-policy attribute-based key encapsulation over access trees.
//!
//! The scheme follows the Bethencourt–Sahai–Waters construction:
//!
//! * setup: `h = g^β`, `e(g,g)^α`; master key `(β, g^α)`.
//! * keygen: fresh `x`, `D = g^((α+x)/β)`, and per attribute `j`
//!   `D_j = g^x · H(j)^(r_j)`, `D'_j = g^(r_j)`.
//! * encrypt: `C = h^s`, `C~ = M · e(g,g)^(α·s)` for a random target-group
//!   payload `M`, and per leaf `y` the pair `C_y = g^(q_y(0))`,
//!   `C'_y = H(attr_y)^(q_y(0))` from top-down polynomial sharing of `s`.
//!   The encapsulated key is `KDF(M, "SZ-DEM")`.
//!
//! Decryption recombines leaf factors `e(g,g)^(x·q_y(0))` with Lagrange
//! coefficients up to `e(g,g)^(x·s)`, strips it from `e(C, D)` to obtain
//! `e(g,g)^(α·s)` and unmasks `M`. The per-key `x` ties all of one key's
//! leaf factors together, so components of different keys cannot be pooled.

use std::collections::BTreeMap;

use rand::RngCore;
use thiserror::Error;

use crate::crypto::{kdf, LABEL_DEM};
use crate::field::Field;
use crate::group::BilinearGroup;
use crate::policy::{parse_policy, serialize_policy, AccessTree, Attribute, AttributeSet, Node};
use crate::sharing::{lagrange_coefficient, Polynomial};
use crate::wire::{DecodeError, Reader, Writer};

pub const HEADER_MAGIC: &[u8; 4] = b"SZH1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbeError {
    #[error("key generation needs at least one attribute")]
    EmptyAttributeSet,
    #[error("decryption failed")]
    DecryptFailure,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
}

impl From<DecodeError> for AbeError {
    fn from(e: DecodeError) -> Self {
        AbeError::MalformedHeader(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemPublicKey<G: BilinearGroup> {
    pub group: G,
    pub g: G::G,
    pub h: G::G,
    pub egg_alpha: G::Gt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterSecretKey<G: BilinearGroup> {
    pub group: G,
    pub beta: G::Scalar,
    pub g_alpha: G::G,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeComponent<G: BilinearGroup> {
    pub d: G::G,
    pub d_prime: G::G,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbeSecretKey<G: BilinearGroup> {
    pub group: G,
    pub x: G::Scalar,
    pub d: G::G,
    pub components: BTreeMap<Attribute, AttributeComponent<G>>,
}

impl<G: BilinearGroup> AbeSecretKey<G> {
    pub fn attributes(&self) -> AttributeSet {
        self.components.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafCiphertext<G: BilinearGroup> {
    pub c: G::G,
    pub c_prime: G::G,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbeCiphertextHeader<G: BilinearGroup> {
    pub group: G,
    pub tree: AccessTree,
    pub c_tilde: G::Gt,
    pub c: G::G,
    /// One entry per tree leaf, in leaf serialization order.
    pub leaves: Vec<LeafCiphertext<G>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct EncapsulatedKey(pub [u8; 32]);

impl std::fmt::Debug for EncapsulatedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("EncapsulatedKey(..)")
    }
}

fn hash_attr<G: BilinearGroup>(group: &G, attr: &Attribute) -> G::G {
    group.hash_to_g(attr.as_str().as_bytes())
}

fn nonzero_scalar<G: BilinearGroup, R: RngCore + ?Sized>(group: &G, rng: &mut R) -> G::Scalar {
    loop {
        let s = group.random_scalar(rng);
        if !s.is_zero() {
            return s;
        }
    }
}

pub fn abe_setup<G: BilinearGroup, R: RngCore + ?Sized>(
    group: G,
    rng: &mut R,
) -> (SystemPublicKey<G>, MasterSecretKey<G>) {
    let alpha = group.random_scalar(rng);
    let beta = nonzero_scalar(&group, rng);
    let g = group.generator();
    let pk = SystemPublicKey {
        h: group.g_exp(&g, &beta),
        egg_alpha: group.gt_exp(&group.pair(&g, &g), &alpha),
        g: g.clone(),
        group: group.clone(),
    };
    let mk = MasterSecretKey { g_alpha: group.g_exp(&g, &alpha), beta, group };
    (pk, mk)
}

pub fn abe_keygen<G: BilinearGroup, R: RngCore + ?Sized>(
    mk: &MasterSecretKey<G>,
    attrs: &AttributeSet,
    rng: &mut R,
) -> Result<AbeSecretKey<G>, AbeError> {
    if attrs.is_empty() {
        return Err(AbeError::EmptyAttributeSet);
    }
    let grp = &mk.group;
    let g = grp.generator();
    let x = grp.random_scalar(rng);
    let g_x = grp.g_exp(&g, &x);
    let beta_inv = mk.beta.inverse().expect("β is non-zero");
    let d = grp.g_exp(&grp.g_mul(&mk.g_alpha, &g_x), &beta_inv);
    let components = attrs
        .iter()
        .map(|attr| {
            let r = grp.random_scalar(rng);
            let comp = AttributeComponent {
                d: grp.g_mul(&g_x, &grp.g_exp(&hash_attr(grp, attr), &r)),
                d_prime: grp.g_exp(&g, &r),
            };
            (attr.clone(), comp)
        })
        .collect();
    Ok(AbeSecretKey { group: grp.clone(), x, d, components })
}

fn share_node<G: BilinearGroup, R: RngCore + ?Sized>(
    pk: &SystemPublicKey<G>,
    node: &Node,
    value: G::Scalar,
    rng: &mut R,
    out: &mut Vec<LeafCiphertext<G>>,
) {
    let grp = &pk.group;
    match node {
        Node::Leaf(attr) => out.push(LeafCiphertext {
            c: grp.g_exp(&pk.g, &value),
            c_prime: grp.g_exp(&hash_attr(grp, attr), &value),
        }),
        Node::Gate { threshold, children } => {
            let poly = Polynomial::random(value, threshold - 1, rng);
            for (i, child) in children.iter().enumerate() {
                let share = poly.evaluate(G::Scalar::from_u64(i as u64 + 1));
                share_node(pk, child, share, rng, out);
            }
        }
    }
}

/// Encryption that also returns the sharing secret `s` and payload `M`.
pub(crate) fn encrypt_with_secrets<G: BilinearGroup, R: RngCore + ?Sized>(
    pk: &SystemPublicKey<G>,
    tree: &AccessTree,
    rng: &mut R,
) -> (AbeCiphertextHeader<G>, EncapsulatedKey, G::Scalar, G::Gt) {
    let grp = &pk.group;
    let s = grp.random_scalar(rng);
    let payload = grp.random_gt(rng);
    let mut leaves = Vec::new();
    share_node(pk, tree.root(), s, rng, &mut leaves);
    let header = AbeCiphertextHeader {
        group: grp.clone(),
        tree: tree.clone(),
        c_tilde: grp.gt_mul(&payload, &grp.gt_exp(&pk.egg_alpha, &s)),
        c: grp.g_exp(&pk.h, &s),
        leaves,
    };
    let key = EncapsulatedKey(kdf(&grp.encode_gt(&payload), LABEL_DEM));
    (header, key, s, payload)
}

pub fn abe_encrypt<G: BilinearGroup, R: RngCore + ?Sized>(
    pk: &SystemPublicKey<G>,
    tree: &AccessTree,
    rng: &mut R,
) -> (AbeCiphertextHeader<G>, EncapsulatedKey) {
    let (header, key, _, _) = encrypt_with_secrets(pk, tree, rng);
    (header, key)
}

/// `e(D_j, C_y) / e(D'_j, C'_y) = e(g,g)^(x·q_y(0))` for leaf number `leaf`.
///
/// `None` when the key holds no component for that leaf's attribute.
pub fn leaf_factor<G: BilinearGroup>(
    sk: &AbeSecretKey<G>,
    header: &AbeCiphertextHeader<G>,
    leaf: usize,
) -> Option<G::Gt> {
    let attr = *header.tree.leaves().get(leaf)?;
    let comp = sk.components.get(attr)?;
    let ct = header.leaves.get(leaf)?;
    let grp = &sk.group;
    Some(grp.gt_div(&grp.pair(&comp.d, &ct.c), &grp.pair(&comp.d_prime, &ct.c_prime)))
}

/// Lagrange recombination in the exponent of factors held at child indices.
pub fn combine_factors<G: BilinearGroup>(group: &G, factors: &[(u64, G::Gt)]) -> G::Gt {
    let indices: Vec<G::Scalar> = factors.iter().map(|(i, _)| G::Scalar::from_u64(*i)).collect();
    factors.iter().zip(&indices).fold(group.gt_identity(), |acc, ((_, f), &i)| {
        let coeff = lagrange_coefficient(i, &indices).expect("child indices are distinct");
        group.gt_mul(&acc, &group.gt_exp(f, &coeff))
    })
}

/// Given the root factor `e(g,g)^(x·s)`, strips it from `e(C, D)` and unmasks the payload.
pub fn unmask<G: BilinearGroup>(
    sk: &AbeSecretKey<G>,
    header: &AbeCiphertextHeader<G>,
    root_factor: &G::Gt,
) -> EncapsulatedKey {
    let grp = &sk.group;
    let blinding = grp.gt_div(&grp.pair(&header.c, &sk.d), root_factor);
    let payload = grp.gt_div(&header.c_tilde, &blinding);
    EncapsulatedKey(kdf(&grp.encode_gt(&payload), LABEL_DEM))
}

fn decrypt_node<G: BilinearGroup>(
    sk: &AbeSecretKey<G>,
    header: &AbeCiphertextHeader<G>,
    node: &Node,
    next_leaf: &mut usize,
) -> Option<G::Gt> {
    match node {
        Node::Leaf(_) => {
            let leaf = *next_leaf;
            *next_leaf += 1;
            leaf_factor(sk, header, leaf)
        }
        Node::Gate { threshold, children } => {
            let satisfied: Vec<(u64, G::Gt)> = children
                .iter()
                .enumerate()
                .filter_map(|(i, child)| {
                    decrypt_node(sk, header, child, next_leaf).map(|f| (i as u64 + 1, f))
                })
                .collect();
            (satisfied.len() >= *threshold)
                .then(|| combine_factors(&sk.group, &satisfied[..*threshold]))
        }
    }
}

pub fn abe_decrypt<G: BilinearGroup>(
    sk: &AbeSecretKey<G>,
    header: &AbeCiphertextHeader<G>,
) -> Result<EncapsulatedKey, AbeError> {
    if header.leaves.len() != header.tree.leaves().len() {
        return Err(AbeError::MalformedHeader("leaf count does not match policy".into()));
    }
    if header.group != sk.group {
        return Err(AbeError::MalformedHeader("group backend mismatch".into()));
    }
    if !header.tree.satisfies(&sk.attributes()) {
        return Err(AbeError::DecryptFailure);
    }
    let mut next_leaf = 0;
    let root = decrypt_node(sk, header, header.tree.root(), &mut next_leaf)
        .ok_or(AbeError::DecryptFailure)?;
    Ok(unmask(sk, header, &root))
}

fn read_g<G: BilinearGroup>(group: &G, r: &mut Reader<'_>) -> Result<G::G, DecodeError> {
    let at = r.offset();
    let raw = r.bytes16()?;
    group
        .decode_g(raw)
        .ok_or(DecodeError { offset: at, reason: "invalid group element".into() })
}

fn read_gt<G: BilinearGroup>(group: &G, r: &mut Reader<'_>) -> Result<G::Gt, DecodeError> {
    let at = r.offset();
    let raw = r.bytes16()?;
    group
        .decode_gt(raw)
        .ok_or(DecodeError { offset: at, reason: "invalid target-group element".into() })
}

fn read_scalar<G: BilinearGroup>(group: &G, r: &mut Reader<'_>) -> Result<G::Scalar, DecodeError> {
    let at = r.offset();
    let raw = r.bytes16()?;
    group
        .decode_scalar(raw)
        .ok_or(DecodeError { offset: at, reason: "invalid scalar".into() })
}

fn read_backend<G: BilinearGroup>(group: &G, r: &mut Reader<'_>) -> Result<(), DecodeError> {
    let id = r.u8()?;
    if id != group.backend_id() {
        return Err(DecodeError {
            offset: r.offset() - 1,
            reason: format!("backend id {id:#04x} does not match {:#04x}", group.backend_id()),
        });
    }
    Ok(())
}

impl<G: BilinearGroup> AbeCiphertextHeader<G> {
    /// `"SZH1" | backend | policy (u16) | C~ | C | (C_y, C'_y)*`, elements u16-prefixed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let grp = &self.group;
        let mut w = Writer::new();
        w.raw(HEADER_MAGIC)
            .u8(grp.backend_id())
            .bytes16(serialize_policy(&self.tree).as_bytes())
            .bytes16(&grp.encode_gt(&self.c_tilde))
            .bytes16(&grp.encode_g(&self.c));
        for leaf in &self.leaves {
            w.bytes16(&grp.encode_g(&leaf.c)).bytes16(&grp.encode_g(&leaf.c_prime));
        }
        w.finish()
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        r.magic(HEADER_MAGIC)?;
        read_backend(group, &mut r)?;
        let policy_at = r.offset();
        let tree = parse_policy(r.str16()?).map_err(|e| {
            AbeError::MalformedHeader(format!("policy at offset {policy_at}: {e}"))
        })?;
        let c_tilde = read_gt(group, &mut r)?;
        let c = read_g(group, &mut r)?;
        let n = tree.leaves().len();
        let mut leaves = Vec::with_capacity(n);
        for _ in 0..n {
            let c = read_g(group, &mut r)?;
            let c_prime = read_g(group, &mut r)?;
            leaves.push(LeafCiphertext { c, c_prime });
        }
        r.finish()?;
        Ok(AbeCiphertextHeader { group: group.clone(), tree, c_tilde, c, leaves })
    }
}

impl<G: BilinearGroup> SystemPublicKey<G> {
    pub fn write(&self, w: &mut Writer) {
        let grp = &self.group;
        w.u8(grp.backend_id())
            .bytes16(&grp.encode_g(&self.g))
            .bytes16(&grp.encode_g(&self.h))
            .bytes16(&grp.encode_gt(&self.egg_alpha));
    }

    pub fn read(group: &G, r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        read_backend(group, r)?;
        Ok(SystemPublicKey {
            g: read_g(group, r)?,
            h: read_g(group, r)?,
            egg_alpha: read_gt(group, r)?,
            group: group.clone(),
        })
    }
}

impl<G: BilinearGroup> MasterSecretKey<G> {
    pub fn write(&self, w: &mut Writer) {
        let grp = &self.group;
        w.u8(grp.backend_id())
            .bytes16(&grp.encode_scalar(&self.beta))
            .bytes16(&grp.encode_g(&self.g_alpha));
    }

    pub fn read(group: &G, r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        read_backend(group, r)?;
        let at = r.offset();
        let beta = read_scalar(group, r)?;
        if beta.is_zero() {
            return Err(DecodeError { offset: at, reason: "β is zero".into() });
        }
        Ok(MasterSecretKey { beta, g_alpha: read_g(group, r)?, group: group.clone() })
    }
}

impl<G: BilinearGroup> AbeSecretKey<G> {
    pub fn write(&self, w: &mut Writer) {
        let grp = &self.group;
        w.u8(grp.backend_id())
            .bytes16(&grp.encode_scalar(&self.x))
            .bytes16(&grp.encode_g(&self.d))
            .u16(u16::try_from(self.components.len()).expect("at most 65535 attributes"));
        for (attr, comp) in &self.components {
            w.bytes16(attr.as_str().as_bytes())
                .bytes16(&grp.encode_g(&comp.d))
                .bytes16(&grp.encode_g(&comp.d_prime));
        }
    }

    pub fn read(group: &G, r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        read_backend(group, r)?;
        let x = read_scalar(group, r)?;
        let d = read_g(group, r)?;
        let n = r.u16()?;
        let mut components = BTreeMap::new();
        for _ in 0..n {
            let at = r.offset();
            let attr = Attribute::new(r.str16()?)
                .map_err(|e| DecodeError { offset: at, reason: e.to_string() })?;
            let comp = AttributeComponent { d: read_g(group, r)?, d_prime: read_g(group, r)? };
            if components.insert(attr, comp).is_some() {
                return Err(DecodeError { offset: at, reason: "duplicate attribute".into() });
            }
        }
        if components.is_empty() {
            return Err(r.error("key without attributes"));
        }
        Ok(AbeSecretKey { group: group.clone(), x, d, components })
    }
}
