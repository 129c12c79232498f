//! Suite 0x01 primitives: SHA-256, HMAC-SHA256 token PRF, HKDF-SHA256,
//! ChaCha20-Poly1305 and Ed25519.
//!
//! Nothing here reads the clock or ambient entropy; randomness is always
//! passed in.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use rand::RngCore;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::wire::{DecodeError, Reader, Writer};

pub const SUITE_ID: u8 = 0x01;
pub const DEFAULT_WINDOW: u64 = 30;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const TOKEN_LEN: usize = 16;
pub const SIGNATURE_LEN: usize = 64;
pub const PUBLIC_KEY_LEN: usize = 32;

pub const LABEL_DEM: &[u8] = b"SZ-DEM";
pub const LABEL_TOKEN: &[u8] = b"SZ-TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("token window must be at least one second")]
    ZeroWindow,
    #[error("authentication failed")]
    AuthFailure,
    #[error("malformed signature or public key")]
    MalformedSignature,
    #[error("unsupported suite id {0:#04x}")]
    UnsupportedSuite(u8),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest(pub [u8; 32]);

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest({})", to_hex(&self.0))
    }
}

pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Short printable fingerprint: first 8 bytes of the SHA-256, hex.
pub fn fingerprint(data: &[u8]) -> String {
    to_hex(&hash(data).0[..8])
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The system-wide seed of the token authenticator.
#[derive(Clone, PartialEq, Eq)]
pub struct TokenSeed(pub [u8; 32]);

impl TokenSeed {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        TokenSeed(seed)
    }
}

impl std::fmt::Debug for TokenSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TokenSeed(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub tk: [u8; TOKEN_LEN],
    pub window_index: u64,
}

/// `tk = HMAC-SHA256(seed, be64(floor(time / window)))[..16]`.
pub fn token_at(seed: &TokenSeed, time: u64, window: u64) -> Result<Token, CryptoError> {
    if window == 0 {
        return Err(CryptoError::ZeroWindow);
    }
    let window_index = time / window;
    Ok(Token { tk: token_for_window(seed, window_index), window_index })
}

pub(crate) fn token_for_window(seed: &TokenSeed, window_index: u64) -> [u8; TOKEN_LEN] {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&seed.0).expect("HMAC takes any key length");
    mac.update(&window_index.to_be_bytes());
    let out = mac.finalize().into_bytes();
    out[..TOKEN_LEN].try_into().expect("digest is 32 bytes")
}

/// HKDF-SHA256 with no salt and the context label as `info`.
pub fn kdf(input: &[u8], label: &[u8]) -> [u8; 32] {
    let mut okm = [0u8; 32];
    Hkdf::<Sha256>::new(None, input)
        .expand(label, &mut okm)
        .expect("32 bytes is a valid HKDF output length");
    okm
}

/// AEAD output: nonce, then ciphertext with the 16-byte tag appended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedBox {
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
}

impl SealedBox {
    /// `suite | nonce | u32 len | ciphertext‖tag`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(SUITE_ID).raw(&self.nonce).bytes32(&self.ciphertext);
        w.finish()
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, CryptoError> {
        let suite = r.u8()?;
        if suite != SUITE_ID {
            return Err(CryptoError::UnsupportedSuite(suite));
        }
        let nonce = r.array()?;
        let ciphertext = r.bytes32()?;
        if ciphertext.len() < TAG_LEN {
            return Err(r.error("sealed box shorter than its tag").into());
        }
        Ok(SealedBox { nonce, ciphertext: ciphertext.to_vec() })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let sealed = Self::read(&mut r)?;
        r.finish()?;
        Ok(sealed)
    }
}

pub fn seal<R: RngCore + ?Sized>(key: &[u8; 32], plaintext: &[u8], rng: &mut R) -> SealedBox {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: plaintext, aad: &[SUITE_ID] })
        .expect("ChaCha20-Poly1305 encryption is infallible for in-memory buffers");
    SealedBox { nonce, ciphertext }
}

/// Wrong key and tampering are reported identically.
pub fn open(key: &[u8; 32], sealed: &SealedBox) -> Result<Vec<u8>, CryptoError> {
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    cipher
        .decrypt(
            Nonce::from_slice(&sealed.nonce),
            Payload { msg: &sealed.ciphertext, aad: &[SUITE_ID] },
        )
        .map_err(|_| CryptoError::AuthFailure)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PublicKey({})", to_hex(&self.0))
    }
}

impl PublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw: [u8; PUBLIC_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::MalformedSignature)?;
        Ok(PublicKey(raw))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Signature({}..)", to_hex(&self.0[..8]))
    }
}

impl Signature {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw: [u8; SIGNATURE_LEN] = bytes.try_into().map_err(|_| CryptoError::MalformedSignature)?;
        Ok(Signature(raw))
    }

    /// `suite | u16 len | signature`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(SUITE_ID).bytes16(&self.0);
        w.finish()
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, CryptoError> {
        let suite = r.u8()?;
        if suite != SUITE_ID {
            return Err(CryptoError::UnsupportedSuite(suite));
        }
        Signature::from_slice(r.bytes16()?)
    }
}

/// Ed25519 signing key. The 32-byte secret is the whole private state.
#[derive(Clone)]
pub struct SigningKeypair {
    key: SigningKey,
}

impl std::fmt::Debug for SigningKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigningKeypair").field("public", &self.public()).finish_non_exhaustive()
    }
}

impl PartialEq for SigningKeypair {
    fn eq(&self, other: &Self) -> bool {
        self.key.to_bytes() == other.key.to_bytes()
    }
}

impl Eq for SigningKeypair {}

impl SigningKeypair {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        Self::from_secret(secret)
    }

    pub fn from_secret(secret: [u8; 32]) -> Self {
        SigningKeypair { key: SigningKey::from_bytes(&secret) }
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.key.verifying_key().to_bytes())
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.key.sign(msg).to_bytes())
    }
}

pub fn sign(key: &SigningKeypair, msg: &[u8]) -> Signature {
    key.sign(msg)
}

/// True only for an untampered `(msg, sig)` under `public`.
pub fn verify(public: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&public.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify_strict(msg, &sig).is_ok()
}
