//! Key infrastructure: the central authority (CA), secure zone authorities
//! (SZA) and firearm key bundles, plus their file formats.
//!
//! The zone message itself and its assessment live in [`message`].

use std::collections::BTreeMap;

use rand::RngCore;
use thiserror::Error;

use crate::abe::{abe_keygen, abe_setup, AbeError, AbeSecretKey, MasterSecretKey, SystemPublicKey};
use crate::crypto::{
    verify, CryptoError, PublicKey, Signature, SigningKeypair, TokenSeed, DEFAULT_WINDOW, SUITE_ID,
};
use crate::group::{BilinearGroup, Scalar61, TransparentGroup};
use crate::policy::{parse_policy, serialize_policy, AccessTree, Attribute, AttributeSet, PolicyError};
use crate::wire::{DecodeError, Reader, Writer};

mod message;

pub use message::{
    assess, assess_with_skew, compose_zone_message, parse_zone_message, AdvisoryOutcome, InnerBlob,
    OutcomeKind, ZoneMessage, MAX_MESSAGE_LEN, MESSAGE_MAGIC,
};

/// Pairing backend used by the protocol layer.
pub type Group = TransparentGroup;

pub const CA_MAGIC: &[u8] = b"SZCA1";
pub const SZA_MAGIC: &[u8] = b"SZSZA1";
pub const BUNDLE_MAGIC: &[u8] = b"SZTPD1";
pub const CERT_MAGIC: &[u8] = b"SZCRT1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("SZA id {0} is already registered")]
    DuplicateSzaId(u32),
    #[error("attribute {0:?} is not in the CA universe")]
    UnknownAttribute(String),
    #[error("expiration {et} is not after issuance time {issued_at}")]
    InvalidExpiration { et: u64, issued_at: u64 },
    #[error("token window must be at least one second")]
    ZeroWindow,
    #[error("a firearm needs at least one attribute")]
    EmptyAttributeSet,
    #[error("message of {0} bytes exceeds the 64 KiB limit")]
    MessageTooLarge(usize),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

fn read_suite(r: &mut Reader<'_>) -> Result<u8, DecodeError> {
    let at = r.offset();
    let suite = r.u8()?;
    if suite != SUITE_ID {
        return Err(DecodeError { offset: at, reason: format!("unsupported suite id {suite:#04x}") });
    }
    Ok(suite)
}

fn crypto_decode(r: &Reader<'_>, e: CryptoError) -> DecodeError {
    match e {
        CryptoError::Decode(d) => d,
        other => r.error(other.to_string()),
    }
}

fn read_public_key(r: &mut Reader<'_>) -> Result<PublicKey, DecodeError> {
    let raw = r.bytes16()?;
    PublicKey::from_slice(raw).map_err(|e| crypto_decode(r, e))
}

fn read_signature(r: &mut Reader<'_>) -> Result<Signature, DecodeError> {
    Signature::read(r).map_err(|e| crypto_decode(r, e))
}

fn read_seed(r: &mut Reader<'_>) -> Result<TokenSeed, DecodeError> {
    Ok(TokenSeed(r.array()?))
}

fn read_window(r: &mut Reader<'_>) -> Result<u64, DecodeError> {
    let at = r.offset();
    match r.u64()? {
        0 => Err(DecodeError { offset: at, reason: "token window is zero".into() }),
        w => Ok(w),
    }
}

fn read_keypair(r: &mut Reader<'_>) -> Result<SigningKeypair, DecodeError> {
    Ok(SigningKeypair::from_secret(r.array()?))
}

fn read_attr_set(r: &mut Reader<'_>) -> Result<AttributeSet, DecodeError> {
    let n = r.u16()?;
    let mut set = AttributeSet::new();
    for _ in 0..n {
        let at = r.offset();
        let attr = Attribute::new(r.str16()?).map_err(|e| DecodeError { offset: at, reason: e.to_string() })?;
        if !set.insert(attr) {
            return Err(DecodeError { offset: at, reason: "duplicate attribute".into() });
        }
    }
    Ok(set)
}

fn write_attr_set(w: &mut Writer, set: &AttributeSet) {
    w.u16(u16::try_from(set.len()).expect("at most 65535 attributes"));
    for a in set.iter() {
        w.bytes16(a.as_str().as_bytes());
    }
}

/// CA signature over `be32(sza_id) ‖ sza public key`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Certificate {
    pub sza_id: u32,
    pub sza_public: PublicKey,
    pub ca_signature: Signature,
}

impl Certificate {
    pub fn signed_bytes(sza_id: u32, sza_public: &PublicKey) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(sza_id).raw(&sza_public.0);
        w.finish()
    }

    pub fn issue(ca_key: &SigningKeypair, sza_id: u32, sza_public: PublicKey) -> Self {
        let ca_signature = ca_key.sign(&Self::signed_bytes(sza_id, &sza_public));
        Certificate { sza_id, sza_public, ca_signature }
    }

    pub fn verify(&self, ca_public: &PublicKey) -> bool {
        verify(ca_public, &Self::signed_bytes(self.sza_id, &self.sza_public), &self.ca_signature)
    }

    /// `suite | sza_id | pub (u16) | signature`
    pub fn write(&self, w: &mut Writer) {
        w.u8(SUITE_ID)
            .u32(self.sza_id)
            .bytes16(&self.sza_public.0)
            .raw(&self.ca_signature.to_bytes());
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        read_suite(r)?;
        Ok(Certificate { sza_id: r.u32()?, sza_public: read_public_key(r)?, ca_signature: read_signature(r)? })
    }

    /// Certificate file: `"SZCRT1"` followed by the certificate.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(CERT_MAGIC);
        self.write(&mut w);
        w.finish()
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        r.magic(CERT_MAGIC)?;
        let cert = Self::read(&mut r)?;
        r.finish()?;
        Ok(cert)
    }
}

/// What a registering SZA receives back from the CA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SzaRegistration {
    pub certificate: Certificate,
    pub system_public_key: SystemPublicKey<Group>,
    pub token_seed: TokenSeed,
    pub window: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentralAuthority {
    pub system_public_key: SystemPublicKey<Group>,
    master_secret: MasterSecretKey<Group>,
    signing: SigningKeypair,
    token_seed: TokenSeed,
    pub window: u64,
    pub universe: AttributeSet,
    pub registry: BTreeMap<u32, Certificate>,
}

/// Fresh ABE system keys, CA signing key and token seed; empty registry.
pub fn ca_setup<R: RngCore + ?Sized>(
    universe: AttributeSet,
    window: u64,
    rng: &mut R,
) -> Result<CentralAuthority, ProtocolError> {
    if window == 0 {
        return Err(ProtocolError::ZeroWindow);
    }
    let (system_public_key, master_secret) = abe_setup(TransparentGroup, rng);
    let signing = SigningKeypair::generate(rng);
    let token_seed = TokenSeed::generate(rng);
    Ok(CentralAuthority {
        system_public_key,
        master_secret,
        signing,
        token_seed,
        window,
        universe,
        registry: BTreeMap::new(),
    })
}

impl CentralAuthority {
    pub fn setup<R: RngCore + ?Sized>(universe: AttributeSet, rng: &mut R) -> Self {
        ca_setup(universe, DEFAULT_WINDOW, rng).expect("default window is non-zero")
    }

    pub fn public_key(&self) -> PublicKey {
        self.signing.public()
    }

    pub fn check_universe(&self, attrs: &AttributeSet) -> Result<(), ProtocolError> {
        match attrs.iter().find(|a| !self.universe.contains(a)) {
            Some(a) => Err(ProtocolError::UnknownAttribute(a.to_string())),
            None => Ok(()),
        }
    }

    pub fn sza_register(
        &mut self,
        sza_public: PublicKey,
        sza_id: u32,
    ) -> Result<SzaRegistration, ProtocolError> {
        if self.registry.contains_key(&sza_id) {
            return Err(ProtocolError::DuplicateSzaId(sza_id));
        }
        let certificate = Certificate::issue(&self.signing, sza_id, sza_public);
        self.registry.insert(sza_id, certificate);
        Ok(SzaRegistration {
            certificate,
            system_public_key: self.system_public_key.clone(),
            token_seed: self.token_seed.clone(),
            window: self.window,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn firearm_register<R: RngCore + ?Sized>(
        &self,
        attrs: &AttributeSet,
        firearm_id: u64,
        user_id: u64,
        et: u64,
        issued_at: u64,
        rng: &mut R,
    ) -> Result<FirearmKeyBundle, ProtocolError> {
        self.check_universe(attrs)?;
        if et <= issued_at {
            return Err(ProtocolError::InvalidExpiration { et, issued_at });
        }
        let sk = abe_keygen(&self.master_secret, attrs, rng).map_err(|e| match e {
            AbeError::EmptyAttributeSet => ProtocolError::EmptyAttributeSet,
            other => unreachable!("keygen only fails on empty sets: {other}"),
        })?;
        Ok(FirearmKeyBundle {
            x: sk.x,
            sk,
            firearm_id,
            user_id,
            et,
            token_seed: self.token_seed.clone(),
            window: self.window,
            ca_public: self.public_key(),
            suite: SUITE_ID,
        })
    }

    /// CA state file. Holds the master secret: never distribute.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(CA_MAGIC).u8(SUITE_ID);
        self.system_public_key.write(&mut w);
        self.master_secret.write(&mut w);
        w.raw(&self.signing.secret_bytes()).raw(&self.token_seed.0).u64(self.window);
        write_attr_set(&mut w, &self.universe);
        w.u32(self.registry.len() as u32);
        for cert in self.registry.values() {
            cert.write(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let grp = TransparentGroup;
        let mut r = Reader::new(bytes);
        r.magic(CA_MAGIC)?;
        read_suite(&mut r)?;
        let system_public_key = SystemPublicKey::read(&grp, &mut r)?;
        let master_secret = MasterSecretKey::read(&grp, &mut r)?;
        let signing = read_keypair(&mut r)?;
        let token_seed = read_seed(&mut r)?;
        let window = read_window(&mut r)?;
        let universe = read_attr_set(&mut r)?;
        let n = r.u32()?;
        let mut registry = BTreeMap::new();
        for _ in 0..n {
            let at = r.offset();
            let cert = Certificate::read(&mut r)?;
            if registry.insert(cert.sza_id, cert).is_some() {
                return Err(DecodeError { offset: at, reason: "duplicate SZA id".into() });
            }
        }
        r.finish()?;
        Ok(CentralAuthority { system_public_key, master_secret, signing, token_seed, window, universe, registry })
    }

    /// Bytes that must never leave the CA, for leak scans.
    pub fn secret_material(&self) -> Vec<Vec<u8>> {
        let grp = TransparentGroup;
        vec![
            grp.encode_scalar(&self.master_secret.beta),
            grp.encode_g(&self.master_secret.g_alpha),
            self.signing.secret_bytes().to_vec(),
        ]
    }
}

/// A zone authority's state: its keys, certificate and zone policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SzaState {
    pub sza_id: u32,
    pub signing: SigningKeypair,
    pub certificate: Certificate,
    pub system_public_key: SystemPublicKey<Group>,
    pub token_seed: TokenSeed,
    pub window: u64,
    pub policy: AccessTree,
}

impl SzaState {
    /// Generates the SZA key pair, registers it with `ca` and checks the
    /// policy against the CA universe.
    pub fn enroll<R: RngCore + ?Sized>(
        ca: &mut CentralAuthority,
        sza_id: u32,
        policy: AccessTree,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        let leaves: AttributeSet = policy.leaves().into_iter().cloned().collect();
        ca.check_universe(&leaves)?;
        let signing = SigningKeypair::generate(rng);
        let reg = ca.sza_register(signing.public(), sza_id)?;
        Ok(SzaState::from_registration(sza_id, signing, reg, policy))
    }

    pub fn from_registration(sza_id: u32, signing: SigningKeypair, reg: SzaRegistration, policy: AccessTree) -> Self {
        SzaState {
            sza_id,
            signing,
            certificate: reg.certificate,
            system_public_key: reg.system_public_key,
            token_seed: reg.token_seed,
            window: reg.window,
            policy,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(SZA_MAGIC).u8(SUITE_ID).u32(self.sza_id).raw(&self.signing.secret_bytes());
        self.certificate.write(&mut w);
        self.system_public_key.write(&mut w);
        w.raw(&self.token_seed.0)
            .u64(self.window)
            .bytes16(serialize_policy(&self.policy).as_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        r.magic(SZA_MAGIC)?;
        read_suite(&mut r)?;
        let sza_id = r.u32()?;
        let signing = read_keypair(&mut r)?;
        let certificate = Certificate::read(&mut r)?;
        let system_public_key = SystemPublicKey::read(&TransparentGroup, &mut r)?;
        let token_seed = read_seed(&mut r)?;
        let window = read_window(&mut r)?;
        let at = r.offset();
        let policy = parse_policy(r.str16()?).map_err(|e| DecodeError { offset: at, reason: e.to_string() })?;
        r.finish()?;
        if certificate.sza_id != sza_id || certificate.sza_public != signing.public() {
            return Err(DecodeError { offset: 0, reason: "certificate does not match SZA key".into() });
        }
        Ok(SzaState { sza_id, signing, certificate, system_public_key, token_seed, window, policy })
    }
}

/// Contents of a firearm's tamper-proof device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirearmKeyBundle {
    pub sk: AbeSecretKey<Group>,
    pub firearm_id: u64,
    pub user_id: u64,
    /// Mirrors `sk.x`.
    pub x: Scalar61,
    pub et: u64,
    pub token_seed: TokenSeed,
    pub window: u64,
    pub ca_public: PublicKey,
    pub suite: u8,
}

impl FirearmKeyBundle {
    pub fn attributes(&self) -> AttributeSet {
        self.sk.attributes()
    }

    /// `"SZTPD1" | suite | firearm_id | user_id | x | et | window | seed | CA pub | ABE key`
    pub fn to_bytes(&self) -> Vec<u8> {
        let grp = TransparentGroup;
        let mut w = Writer::new();
        w.raw(BUNDLE_MAGIC)
            .u8(self.suite)
            .u64(self.firearm_id)
            .u64(self.user_id)
            .bytes16(&grp.encode_scalar(&self.x))
            .u64(self.et)
            .u64(self.window)
            .raw(&self.token_seed.0)
            .bytes16(&self.ca_public.0);
        self.sk.write(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let grp = TransparentGroup;
        let mut r = Reader::new(bytes);
        r.magic(BUNDLE_MAGIC)?;
        let suite = read_suite(&mut r)?;
        let firearm_id = r.u64()?;
        let user_id = r.u64()?;
        let at = r.offset();
        let x = grp
            .decode_scalar(r.bytes16()?)
            .ok_or(DecodeError { offset: at, reason: "invalid scalar".into() })?;
        let et = r.u64()?;
        let window = read_window(&mut r)?;
        let token_seed = read_seed(&mut r)?;
        let ca_public = read_public_key(&mut r)?;
        let sk = AbeSecretKey::read(&grp, &mut r)?;
        r.finish()?;
        if sk.x != x {
            return Err(DecodeError { offset: at, reason: "x does not match the ABE key".into() });
        }
        Ok(FirearmKeyBundle { sk, firearm_id, user_id, x, et, token_seed, window, ca_public, suite })
    }
}
