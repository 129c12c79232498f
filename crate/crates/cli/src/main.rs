//! `szctl`: batch operator tool for the secure zone system.
//!
//! Exit codes: 0 authorized or success, 1 a non-authorized assessment,
//! 2 usage error, 3 crypto or state error. Failures print one JSON line on
//! stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sz_core::policy::{parse_policy, AccessTree, Attribute};

pub const EXIT_REJECTED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_STATE: u8 = 3;

#[derive(Parser)]
#[command(name = "szctl", version, about = "Secure zone key ceremonies, broadcasts and simulation")]
struct Cli {
    /// Print diagnostics to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Central authority operations
    #[command(subcommand)]
    Ca(CaCommand),
    /// Secure zone authority operations
    #[command(subcommand)]
    Sza(SzaCommand),
    /// Firearm key bundles and assessment
    #[command(subcommand)]
    Firearm(FirearmCommand),
    /// Zone broadcasts
    #[command(subcommand)]
    Zone(ZoneCommand),
    /// Describe any szctl file without revealing secrets
    Inspect {
        file: PathBuf,
    },
    /// Run a zone simulation scenario
    Simulate(SimulateArgs),
    /// Flip one byte of a file, for fault injection
    Tamper(TamperArgs),
}

#[derive(Subcommand)]
enum CaCommand {
    /// Create a new CA state file
    Init(CaInitArgs),
}

#[derive(Args)]
struct CaInitArgs {
    /// RNG seed; the same seed gives the same CA
    #[arg(long)]
    seed: u64,
    /// Attribute universe, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_attribute,
        default_value = "officer,rangemaster,civilian,hunter,licensed,security,instructor"
    )]
    universe: Vec<Attribute>,
    /// Token window in seconds
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    window: u64,
    #[arg(long, default_value = "ca.szca")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SzaCommand {
    /// Enroll a zone authority with the CA and write its state file
    Register(SzaRegisterArgs),
}

#[derive(Args)]
struct SzaRegisterArgs {
    /// CA state file, updated in place with the new registration
    #[arg(long, default_value = "ca.szca")]
    ca: PathBuf,
    #[arg(long)]
    id: u32,
    /// Zone policy, e.g. "officer or (licensed and instructor)"
    #[arg(long, value_parser = parse_tree)]
    policy: AccessTree,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "sza.szsza")]
    out: PathBuf,
    /// Also write the certificate on its own
    #[arg(long)]
    cert_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum FirearmCommand {
    /// Issue a firearm key bundle from the CA
    Register(FirearmRegisterArgs),
    /// Assess a zone message; prints one outcome line
    Assess(AssessArgs),
}

#[derive(Args)]
struct FirearmRegisterArgs {
    #[arg(long, default_value = "ca.szca")]
    ca: PathBuf,
    /// Granted attribute; repeat for several
    #[arg(long = "attr", required = true, value_parser = parse_attribute)]
    attrs: Vec<Attribute>,
    /// Key expiry, unix seconds
    #[arg(long)]
    expires: u64,
    /// Issuance time, unix seconds
    #[arg(long, default_value_t = 0)]
    issued_at: u64,
    #[arg(long, default_value_t = 1)]
    firearm_id: u64,
    /// Defaults to the firearm id
    #[arg(long)]
    user_id: Option<u64>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "firearm.sztpd")]
    out: PathBuf,
}

#[derive(Args)]
struct AssessArgs {
    #[arg(long, default_value = "firearm.sztpd")]
    bundle: PathBuf,
    #[arg(long, default_value = "zone.szm")]
    message: PathBuf,
    /// Firearm clock, unix seconds
    #[arg(long)]
    at: u64,
    /// Token windows accepted either side of the local window
    #[arg(long, default_value_t = 1)]
    skew: u64,
}

#[derive(Subcommand)]
enum ZoneCommand {
    /// Compose the zone message for time T
    Broadcast(BroadcastArgs),
}

#[derive(Args)]
struct BroadcastArgs {
    #[arg(long, default_value = "sza.szsza")]
    sza: PathBuf,
    /// Zone clock, unix seconds
    #[arg(long)]
    at: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "zone.szm")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// JSONL event log
    #[arg(long)]
    out: PathBuf,
    /// Also write the text summary here
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct TamperArgs {
    #[arg(long, default_value = "zone.szm")]
    message: PathBuf,
    /// Zero-based offset of the byte to change
    #[arg(long)]
    byte: usize,
    /// XOR mask applied to the byte
    #[arg(long, default_value_t = 0xff, value_parser = parse_mask)]
    mask: u8,
    /// Defaults to rewriting the input file
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_attribute(s: &str) -> Result<Attribute, String> {
    Attribute::new(s.trim()).map_err(|e| e.to_string())
}

fn parse_tree(s: &str) -> Result<AccessTree, String> {
    parse_policy(s).map_err(|e| e.to_string())
}

fn parse_mask(s: &str) -> Result<u8, String> {
    let v = match s.strip_prefix("0x") {
        Some(h) => u8::from_str_radix(h, 16),
        None => s.parse(),
    };
    match v {
        Ok(0) => Err("mask must be non-zero".into()),
        Ok(m) => Ok(m),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context { verbose: cli.verbose };
    let result = match cli.command {
        Command::Ca(CaCommand::Init(a)) => commands::ca_init(&ctx, a.seed, a.universe, a.window, &a.out),
        Command::Sza(SzaCommand::Register(a)) => {
            commands::sza_register(&ctx, &a.ca, a.id, a.policy, a.seed, &a.out, a.cert_out.as_deref())
        }
        Command::Firearm(FirearmCommand::Register(a)) => commands::firearm_register(
            &ctx,
            &a.ca,
            a.attrs,
            a.expires,
            a.issued_at,
            a.firearm_id,
            a.user_id.unwrap_or(a.firearm_id),
            a.seed,
            &a.out,
        ),
        Command::Firearm(FirearmCommand::Assess(a)) => {
            commands::assess(&ctx, &a.bundle, &a.message, a.at, a.skew)
        }
        Command::Zone(ZoneCommand::Broadcast(a)) => commands::broadcast(&ctx, &a.sza, a.at, a.seed, &a.out),
        Command::Inspect { file } => commands::inspect(&file),
        Command::Simulate(a) => commands::simulate(&ctx, &a.scenario, &a.out, a.summary.as_deref()),
        Command::Tamper(a) => commands::tamper(&ctx, &a.message, a.byte, a.mask, a.out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let (kind, code) = commands::classify(&err);
            let line = serde_json::json!({
                "error": kind,
                "exit": code,
                "message": format!("{err:#}"),
            });
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}
