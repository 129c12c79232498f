//! The zone broadcast message and the firearm-side assessment.
//!
//! Layering, outermost first:
//!
//! ```text
//! ZoneMessage = "SZM1" | suite | policy (u16) | ABE header (u32) | outer box (u32)
//! outer box   = seal(K, token box)                  K from the ABE header
//! token box   = seal(kdf(tk, "SZ-TOKEN"), inner)    tk from the token authenticator
//! inner       = ts | SZA signature over hash(tk) | certificate
//! ```

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{read_signature, read_suite, Certificate, FirearmKeyBundle, Group, ProtocolError, SzaState};
use crate::abe::{abe_decrypt, abe_encrypt, AbeCiphertextHeader, AbeError};
use crate::crypto::{
    self, hash, kdf, open, seal, token_at, token_for_window, SealedBox, Signature, LABEL_TOKEN, SUITE_ID,
};
use crate::group::TransparentGroup;
use crate::policy::serialize_policy;
use crate::wire::{DecodeError, Reader, Writer};

pub const MESSAGE_MAGIC: &[u8; 4] = b"SZM1";
pub const MAX_MESSAGE_LEN: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneMessage {
    pub suite: u8,
    /// Canonical policy string, in clear; equals the header's tree.
    pub policy: String,
    pub header: AbeCiphertextHeader<Group>,
    pub outer: SealedBox,
}

impl ZoneMessage {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(MESSAGE_MAGIC)
            .u8(self.suite)
            .bytes16(self.policy.as_bytes())
            .bytes32(&self.header.to_bytes())
            .bytes32(&self.outer.to_bytes());
        w.finish()
    }
}

/// Strict decoder: any bad magic, length, suite, trailing byte or policy
/// mismatch is an error carrying the offending offset.
pub fn parse_zone_message(bytes: &[u8]) -> Result<ZoneMessage, DecodeError> {
    if bytes.len() > MAX_MESSAGE_LEN {
        return Err(DecodeError { offset: MAX_MESSAGE_LEN, reason: "message exceeds 64 KiB".into() });
    }
    let mut r = Reader::new(bytes);
    r.magic(MESSAGE_MAGIC)?;
    let suite = read_suite(&mut r)?;
    let policy_at = r.offset();
    let policy = r.str16()?.to_string();
    let header_at = r.offset() + 4;
    let header = AbeCiphertextHeader::from_bytes(&TransparentGroup, r.bytes32()?).map_err(|e| DecodeError {
        offset: header_at,
        reason: e.to_string(),
    })?;
    if serialize_policy(&header.tree) != policy {
        return Err(DecodeError { offset: policy_at, reason: "clear policy differs from header policy".into() });
    }
    let box_at = r.offset() + 4;
    let outer = SealedBox::from_bytes(r.bytes32()?).map_err(|e| DecodeError {
        offset: box_at,
        reason: e.to_string(),
    })?;
    r.finish()?;
    Ok(ZoneMessage { suite, policy, header, outer })
}

/// Plaintext under the token layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnerBlob {
    pub ts: u64,
    pub signature: Signature,
    pub certificate: Certificate,
}

impl InnerBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.ts).raw(&self.signature.to_bytes());
        self.certificate.write(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let ts = r.u64()?;
        let signature = read_signature(&mut r)?;
        let certificate = Certificate::read(&mut r)?;
        r.finish()?;
        Ok(InnerBlob { ts, signature, certificate })
    }
}

/// Builds the broadcast for time `now`. Deterministic in `(sza, now, rng)`.
pub fn compose_zone_message<R: RngCore + ?Sized>(
    sza: &SzaState,
    now: u64,
    rng: &mut R,
) -> Result<Vec<u8>, ProtocolError> {
    let tk = token_at(&sza.token_seed, now, sza.window)?;
    let digest = hash(&tk.tk);
    let inner = InnerBlob { ts: now, signature: sza.signing.sign(&digest.0), certificate: sza.certificate };
    let token_box = seal(&kdf(&tk.tk, LABEL_TOKEN), &inner.to_bytes(), rng);
    let (header, key) = abe_encrypt(&sza.system_public_key, &sza.policy, rng);
    let outer = seal(&key.0, &token_box.to_bytes(), rng);
    let msg = ZoneMessage { suite: SUITE_ID, policy: serialize_policy(&sza.policy), header, outer };
    let bytes = msg.to_bytes();
    if bytes.len() > MAX_MESSAGE_LEN {
        return Err(ProtocolError::MessageTooLarge(bytes.len()));
    }
    Ok(bytes)
}

/// Verdict kinds, in the order the checks run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeKind {
    Authorized,
    PolicyNotSatisfied,
    TokenMismatch,
    KeyExpired,
    InvalidCredential,
    Malformed,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 6] = [
        OutcomeKind::Authorized,
        OutcomeKind::PolicyNotSatisfied,
        OutcomeKind::TokenMismatch,
        OutcomeKind::KeyExpired,
        OutcomeKind::InvalidCredential,
        OutcomeKind::Malformed,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            OutcomeKind::Authorized => "AUTHORIZED",
            OutcomeKind::PolicyNotSatisfied => "POLICY_NOT_SATISFIED",
            OutcomeKind::TokenMismatch => "TOKEN_MISMATCH",
            OutcomeKind::KeyExpired => "KEY_EXPIRED",
            OutcomeKind::InvalidCredential => "INVALID_CREDENTIAL",
            OutcomeKind::Malformed => "MALFORMED",
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvisoryOutcome {
    pub kind: OutcomeKind,
    pub detail: String,
}

impl AdvisoryOutcome {
    fn new(kind: OutcomeKind, detail: impl Into<String>) -> Self {
        AdvisoryOutcome { kind, detail: detail.into() }
    }

    pub fn is_authorized(&self) -> bool {
        self.kind == OutcomeKind::Authorized
    }
}

impl fmt::Display for AdvisoryOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind, self.detail)
    }
}

/// Assessment with the default tolerance of one token window either side.
pub fn assess(bundle: &FirearmKeyBundle, msg: &[u8], now: u64) -> AdvisoryOutcome {
    assess_with_skew(bundle, msg, now, 1)
}

/// Runs the checks in fixed order and reports the first failure:
/// parse, ABE decrypt, outer open, token windows, expiry, credentials.
pub fn assess_with_skew(bundle: &FirearmKeyBundle, msg: &[u8], now: u64, skew_windows: u64) -> AdvisoryOutcome {
    use OutcomeKind::*;

    let parsed = match parse_zone_message(msg) {
        Ok(m) => m,
        Err(e) => return AdvisoryOutcome::new(Malformed, e.to_string()),
    };
    if parsed.suite != bundle.suite {
        return AdvisoryOutcome::new(Malformed, format!("suite {:#04x} not supported", parsed.suite));
    }

    let key = match abe_decrypt(&bundle.sk, &parsed.header) {
        Ok(k) => k,
        Err(AbeError::MalformedHeader(e)) => return AdvisoryOutcome::new(Malformed, e),
        Err(_) => {
            return AdvisoryOutcome::new(
                PolicyNotSatisfied,
                format!(
                    "policy `{}` not satisfied by key attributes (or header content invalid)",
                    parsed.policy
                ),
            )
        }
    };

    let token_box = match open(&key.0, &parsed.outer).and_then(|pt| SealedBox::from_bytes(&pt)) {
        Ok(b) => b,
        Err(_) => return AdvisoryOutcome::new(Malformed, "outer envelope failed authentication"),
    };

    let window = bundle.window;
    let current = now / window;
    let lo = current.saturating_sub(skew_windows);
    let hi = current.saturating_add(skew_windows);
    let found = (lo..=hi).find_map(|w| {
        let tk = token_for_window(&bundle.token_seed, w);
        open(&kdf(&tk, LABEL_TOKEN), &token_box).ok().map(|inner| (tk, inner))
    });
    let Some((tk_u, inner)) = found else {
        return AdvisoryOutcome::new(
            TokenMismatch,
            format!("no token in windows {lo}..={hi} opens the message (local time {now})"),
        );
    };

    let inner = match InnerBlob::from_bytes(&inner) {
        Ok(i) => i,
        Err(e) => return AdvisoryOutcome::new(Malformed, format!("inner blob: {e}")),
    };
    if bundle.et < inner.ts {
        return AdvisoryOutcome::new(KeyExpired, format!("key expired at {} before message time {}", bundle.et, inner.ts));
    }

    if !inner.certificate.verify(&bundle.ca_public) {
        return AdvisoryOutcome::new(
            InvalidCredential,
            format!("certificate of SZA {} does not verify under the CA key", inner.certificate.sza_id),
        );
    }
    if !crypto::verify(&inner.certificate.sza_public, &hash(&tk_u).0, &inner.signature) {
        return AdvisoryOutcome::new(
            InvalidCredential,
            format!("token signature of SZA {} does not verify", inner.certificate.sza_id),
        );
    }

    AdvisoryOutcome::new(Authorized, format!("sza {} ts {}", inner.certificate.sza_id, inner.ts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{parse_policy, AttributeSet};
    use crate::protocol::CentralAuthority;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const T0: u64 = 1_700_000_000;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    struct Fixture {
        ca: CentralAuthority,
        sza: SzaState,
    }

    fn fixture(policy: &str) -> Fixture {
        let universe = AttributeSet::from_names(["officer", "rangemaster", "civilian"]).unwrap();
        let mut ca = CentralAuthority::setup(universe, &mut rng(1));
        let sza = SzaState::enroll(&mut ca, 9, parse_policy(policy).unwrap(), &mut rng(2)).unwrap();
        Fixture { ca, sza }
    }

    fn bundle(f: &Fixture, attrs: &[&str], et: u64) -> FirearmKeyBundle {
        let attrs = AttributeSet::from_names(attrs.iter().copied()).unwrap();
        f.ca.firearm_register(&attrs, 100, 200, et, T0 - 1000, &mut rng(3)).unwrap()
    }

    #[test]
    fn token_window_equivalence() {
        let f = fixture("officer");
        let t = token_at(&f.sza.token_seed, T0, 30).unwrap();
        assert_eq!(token_for_window(&f.sza.token_seed, t.window_index), t.tk);
        let t2 = token_at(&f.sza.token_seed, t.window_index * 30, 30).unwrap();
        assert_eq!(t2.tk, t.tk);
    }

    #[test]
    fn compose_then_assess_authorized() {
        let f = fixture("officer");
        let b = bundle(&f, &["officer", "rangemaster"], T0 + 10_000);
        let msg = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        let out = assess(&b, &msg, T0);
        assert_eq!(out.kind, OutcomeKind::Authorized, "{out}");
    }

    #[test]
    fn codec_round_trip_and_clear_policy() {
        let f = fixture("officer or (rangemaster and civilian)");
        let msg = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        let parsed = parse_zone_message(&msg).unwrap();
        assert_eq!(parsed.to_bytes(), msg);
        assert_eq!(parsed.policy, serialize_policy(&f.sza.policy));
        assert_eq!(parsed.policy, "1 of (officer, 2 of (rangemaster, civilian))");
    }

    #[test]
    fn compose_is_deterministic() {
        let f = fixture("officer");
        let a = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        let b = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_sweep_is_malformed() {
        let f = fixture("officer");
        let b = bundle(&f, &["officer"], T0 + 10_000);
        let msg = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        for cut in 0..msg.len() {
            assert!(parse_zone_message(&msg[..cut]).is_err());
            assert_eq!(assess(&b, &msg[..cut], T0).kind, OutcomeKind::Malformed);
        }
        let mut long = msg.clone();
        long.push(0);
        assert!(parse_zone_message(&long).is_err());
    }

    #[test]
    fn old_magic_is_malformed() {
        let f = fixture("officer");
        let mut msg = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        msg[..4].copy_from_slice(b"SZM0");
        let err = parse_zone_message(&msg).unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn policy_mismatch_is_malformed() {
        let f = fixture("officer");
        let msg = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        let mut parsed = parse_zone_message(&msg).unwrap();
        parsed.policy = "civilian".into();
        assert!(parse_zone_message(&parsed.to_bytes()).is_err());
        parsed.policy = "1 of (officer)".into();
        assert!(parse_zone_message(&parsed.to_bytes()).is_err());
    }

    #[test]
    fn expired_key() {
        let f = fixture("officer");
        let b = bundle(&f, &["officer"], T0 - 1);
        let msg = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        assert_eq!(assess(&b, &msg, T0).kind, OutcomeKind::KeyExpired);
        // et == ts is still valid
        let b = bundle(&f, &["officer"], T0);
        assert_eq!(assess(&b, &msg, T0).kind, OutcomeKind::Authorized);
    }

    #[test]
    fn et_100_ts_200() {
        let f = fixture("officer");
        let attrs = AttributeSet::from_names(["officer"]).unwrap();
        let b = f.ca.firearm_register(&attrs, 1, 1, 100, 0, &mut rng(3)).unwrap();
        let msg = compose_zone_message(&f.sza, 200, &mut rng(4)).unwrap();
        assert_eq!(assess(&b, &msg, 200).kind, OutcomeKind::KeyExpired);
    }

    #[test]
    fn policy_failure_precedes_expiry() {
        let f = fixture("officer");
        let b = bundle(&f, &["civilian"], T0 - 1);
        let msg = compose_zone_message(&f.sza, T0, &mut rng(4)).unwrap();
        assert_eq!(assess(&b, &msg, T0).kind, OutcomeKind::PolicyNotSatisfied);
    }

    #[test]
    fn rogue_ca_certificate() {
        let f = fixture("officer");
        let b = bundle(&f, &["officer"], T0 + 10_000);
        let mut rogue = CentralAuthority::setup(f.ca.universe.clone(), &mut rng(66));
        let reg = rogue.sza_register(f.sza.signing.public(), f.sza.sza_id).unwrap();
        let mut sza = f.sza.clone();
        sza.certificate = reg.certificate;
        let msg = compose_zone_message(&sza, T0, &mut rng(4)).unwrap();
        assert_eq!(assess(&b, &msg, T0).kind, OutcomeKind::InvalidCredential);
    }

    #[test]
    fn foreign_sza_key_with_valid_certificate() {
        let f = fixture("officer");
        let b = bundle(&f, &["officer"], T0 + 10_000);
        let mut sza = f.sza.clone();
        sza.signing = crypto::SigningKeypair::generate(&mut rng(77));
        let msg = compose_zone_message(&sza, T0, &mut rng(4)).unwrap();
        assert_eq!(assess(&b, &msg, T0).kind, OutcomeKind::InvalidCredential);
    }

    #[test]
    fn clock_skew_tolerance() {
        let f = fixture("officer");
        let b = bundle(&f, &["officer"], u64::MAX);
        let ts = 30 * 1000 + 15;
        let msg = compose_zone_message(&f.sza, ts, &mut rng(4)).unwrap();
        for (now, kind) in [
            (ts - 46, OutcomeKind::TokenMismatch),
            (ts - 30, OutcomeKind::Authorized),
            (ts, OutcomeKind::Authorized),
            (ts + 30, OutcomeKind::Authorized),
            (ts + 45, OutcomeKind::TokenMismatch),
            (ts + 60, OutcomeKind::TokenMismatch),
        ] {
            assert_eq!(assess(&b, &msg, now).kind, kind, "now = {now}");
        }
        assert_eq!(assess_with_skew(&b, &msg, ts + 60, 2).kind, OutcomeKind::Authorized);
        assert_eq!(assess_with_skew(&b, &msg, ts + 30, 0).kind, OutcomeKind::TokenMismatch);
    }

    #[test]
    fn garbage_inputs() {
        let f = fixture("officer");
        let b = bundle(&f, &["officer"], T0);
        assert_eq!(assess(&b, &[], T0).kind, OutcomeKind::Malformed);
        assert_eq!(assess(&b, b"SZM1", T0).kind, OutcomeKind::Malformed);
        assert_eq!(assess(&b, &vec![0u8; MAX_MESSAGE_LEN + 1], T0).kind, OutcomeKind::Malformed);
    }

    #[test]
    fn outcome_tokens() {
        let tokens: Vec<&str> = OutcomeKind::ALL.iter().map(|k| k.token()).collect();
        assert_eq!(
            tokens,
            ["AUTHORIZED", "POLICY_NOT_SATISFIED", "TOKEN_MISMATCH", "KEY_EXPIRED", "INVALID_CREDENTIAL", "MALFORMED"]
        );
        assert_eq!(serde_json::to_string(&OutcomeKind::KeyExpired).unwrap(), "\"KEY_EXPIRED\"");
    }
}
