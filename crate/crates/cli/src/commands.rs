use std::fs;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use sz_core::crypto::{fingerprint, kdf};
use sz_core::policy::{AccessTree, Attribute, AttributeSet};
use sz_core::protocol::{
    assess_with_skew, ca_setup, compose_zone_message, parse_zone_message, CentralAuthority, Certificate,
    FirearmKeyBundle, ProtocolError, SzaState, BUNDLE_MAGIC, CA_MAGIC, CERT_MAGIC, MESSAGE_MAGIC, SZA_MAGIC,
};
use sz_core::sim::{self, Scenario, SimError};
use sz_core::wire::DecodeError;

use crate::{EXIT_REJECTED, EXIT_STATE, EXIT_USAGE};

pub struct Context {
    pub verbose: bool,
}

impl Context {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("szctl: {}", msg.as_ref());
        }
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.note(format!("wrote {} ({} bytes)", path.display(), bytes.len()));
        Ok(())
    }
}

/// Raised for flag combinations clap cannot check on its own.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load<T>(path: &Path, what: &str, decode: impl FnOnce(&[u8]) -> Result<T, DecodeError>) -> Result<T> {
    let bytes = read(path)?;
    decode(&bytes).with_context(|| format!("{} is not a valid {what} file", path.display()))
}

/// Machine-readable error kind and exit code for a failure.
pub fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return ("usage", EXIT_USAGE);
        }
        if let Some(e) = cause.downcast_ref::<ProtocolError>() {
            let kind = match e {
                ProtocolError::DuplicateSzaId(_) => "duplicate_sza_id",
                ProtocolError::UnknownAttribute(_) => "unknown_attribute",
                ProtocolError::InvalidExpiration { .. } => "invalid_expiration",
                ProtocolError::ZeroWindow => "zero_window",
                ProtocolError::EmptyAttributeSet => "empty_attribute_set",
                ProtocolError::MessageTooLarge(_) => "message_too_large",
                ProtocolError::Policy(_) => "policy",
                ProtocolError::Decode(_) => "malformed_file",
                ProtocolError::Crypto(_) => "crypto",
            };
            return (kind, EXIT_STATE);
        }
        if let Some(SimError::ScenarioInvalid(_)) = cause.downcast_ref::<SimError>() {
            return ("scenario_invalid", EXIT_STATE);
        }
        if cause.downcast_ref::<DecodeError>().is_some() {
            return ("malformed_file", EXIT_STATE);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ("io", EXIT_STATE);
        }
    }
    ("state", EXIT_STATE)
}

pub fn ca_init(ctx: &Context, seed: u64, universe: Vec<Attribute>, window: u64, out: &Path) -> Result<u8> {
    let universe: AttributeSet = universe.into_iter().collect();
    let ca = ca_setup(universe, window, &mut ChaCha20Rng::seed_from_u64(seed))?;
    ctx.write(out, &ca.to_bytes())?;
    println!("ca {}", fingerprint(&ca.public_key().0));
    Ok(0)
}

pub fn sza_register(
    ctx: &Context,
    ca_path: &Path,
    id: u32,
    policy: AccessTree,
    seed: u64,
    out: &Path,
    cert_out: Option<&Path>,
) -> Result<u8> {
    let mut ca = load(ca_path, "CA state", CentralAuthority::from_bytes)?;
    let sza = SzaState::enroll(&mut ca, id, policy, &mut ChaCha20Rng::seed_from_u64(seed))?;
    ctx.write(out, &sza.to_bytes())?;
    if let Some(path) = cert_out {
        ctx.write(path, &sza.certificate.to_file_bytes())?;
    }
    ctx.write(ca_path, &ca.to_bytes())?;
    println!("sza {id} {}", fingerprint(&sza.certificate.to_file_bytes()));
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn firearm_register(
    ctx: &Context,
    ca_path: &Path,
    attrs: Vec<Attribute>,
    expires: u64,
    issued_at: u64,
    firearm_id: u64,
    user_id: u64,
    seed: u64,
    out: &Path,
) -> Result<u8> {
    let ca = load(ca_path, "CA state", CentralAuthority::from_bytes)?;
    let attrs: AttributeSet = attrs.into_iter().collect();
    let bundle =
        ca.firearm_register(&attrs, firearm_id, user_id, expires, issued_at, &mut ChaCha20Rng::seed_from_u64(seed))?;
    let bytes = bundle.to_bytes();
    ctx.write(out, &bytes)?;
    println!("firearm {firearm_id} {}", fingerprint(&bytes));
    Ok(0)
}

// Keyed on (seed, at) so two broadcasts never share nonces or payloads.
fn broadcast_rng(seed: u64, at: u64) -> ChaCha20Rng {
    let mut input = seed.to_be_bytes().to_vec();
    input.extend_from_slice(&at.to_be_bytes());
    ChaCha20Rng::from_seed(kdf(&input, b"SZCTL-BROADCAST"))
}

pub fn broadcast(ctx: &Context, sza_path: &Path, at: u64, seed: u64, out: &Path) -> Result<u8> {
    let sza = load(sza_path, "SZA state", SzaState::from_bytes)?;
    let msg = compose_zone_message(&sza, at, &mut broadcast_rng(seed, at))?;
    ctx.write(out, &msg)?;
    println!("message {} bytes {}", msg.len(), fingerprint(&msg));
    Ok(0)
}

pub fn assess(ctx: &Context, bundle_path: &Path, message: &Path, at: u64, skew: u64) -> Result<u8> {
    let bundle = load(bundle_path, "firearm key bundle", FirearmKeyBundle::from_bytes)?;
    let msg = read(message)?;
    let outcome = assess_with_skew(&bundle, &msg, at, skew);
    ctx.note(format!("assessed {} ({} bytes) at {at}", message.display(), msg.len()));
    println!("{outcome}");
    Ok(if outcome.is_authorized() { 0 } else { EXIT_REJECTED })
}

fn attr_list(set: &AttributeSet) -> String {
    set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

pub fn inspect(path: &Path) -> Result<u8> {
    let bytes = read(path)?;
    let ctx = || format!("{} is corrupt", path.display());
    if bytes.starts_with(SZA_MAGIC) {
        let sza = SzaState::from_bytes(&bytes).with_context(ctx)?;
        println!("type sza");
        println!("sza_id {}", sza.sza_id);
        println!("policy {}", sza.policy);
        println!("window {}", sza.window);
        println!("public {}", hex::encode(sza.signing.public().0));
        println!("certificate {}", fingerprint(&sza.certificate.to_file_bytes()));
    } else if bytes.starts_with(CA_MAGIC) {
        let ca = CentralAuthority::from_bytes(&bytes).with_context(ctx)?;
        println!("type ca");
        println!("window {}", ca.window);
        println!("universe {}", attr_list(&ca.universe));
        println!("public {}", hex::encode(ca.public_key().0));
        let ids: Vec<String> = ca.registry.keys().map(u32::to_string).collect();
        println!("szas {}", ids.join(","));
    } else if bytes.starts_with(BUNDLE_MAGIC) {
        let b = FirearmKeyBundle::from_bytes(&bytes).with_context(ctx)?;
        println!("type bundle");
        println!("suite {:#04x}", b.suite);
        println!("firearm_id {}", b.firearm_id);
        println!("user_id {}", b.user_id);
        println!("attributes {}", attr_list(&b.attributes()));
        println!("expires {}", b.et);
        println!("window {}", b.window);
        println!("ca {}", fingerprint(&b.ca_public.0));
    } else if bytes.starts_with(CERT_MAGIC) {
        let c = Certificate::from_file_bytes(&bytes).with_context(ctx)?;
        println!("type certificate");
        println!("sza_id {}", c.sza_id);
        println!("public {}", hex::encode(c.sza_public.0));
    } else if bytes.starts_with(MESSAGE_MAGIC) {
        let m = parse_zone_message(&bytes).with_context(ctx)?;
        println!("type message");
        println!("suite {:#04x}", m.suite);
        println!("policy {}", m.policy);
        println!("leaves {}", m.header.leaves.len());
        println!("bytes {}", bytes.len());
    } else {
        bail!(DecodeError { offset: 0, reason: format!("{} has no known file magic", path.display()) });
    }
    Ok(0)
}

pub fn simulate(ctx: &Context, scenario: &Path, out: &Path, summary: Option<&Path>) -> Result<u8> {
    let text = fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let scenario = Scenario::from_json(&text)?;
    let log = sim::run(&scenario)?;
    ctx.write(out, sim::write_log(&log).as_bytes())?;
    let text = sim::report(&log).to_text();
    if let Some(path) = summary {
        ctx.write(path, text.as_bytes())?;
    }
    print!("{text}");
    Ok(0)
}

pub fn tamper(ctx: &Context, message: &Path, byte: usize, mask: u8, out: Option<&Path>) -> Result<u8> {
    let mut bytes = read(message)?;
    let Some(b) = bytes.get_mut(byte) else {
        return Err(UsageError(format!("offset {byte} is past the end of a {}-byte file", bytes.len())).into());
    };
    let before = *b;
    *b ^= mask;
    let after = *b;
    ctx.write(out.unwrap_or(message), &bytes)?;
    println!("byte {byte} {before:#04x} -> {after:#04x}");
    Ok(0)
}
