//! Deterministic simulation of zone beacons and mobile firearms.
//!
//! Zones are discs. Every zone broadcasts a freshly composed message at true
//! times `k·period` (`0 ≤ k·period ≤ duration`), stamped with its own clock
//! `epoch + k·period + clock_offset`. Each firearm within the disc at that
//! instant assesses the message against its own clock
//! `epoch + t + clock_offset`. One record is logged per (beacon, in-range
//! firearm). Overlapping zones produce independent per-zone records; no
//! aggregation is attempted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{kdf, DEFAULT_WINDOW};
use crate::policy::{parse_policy, AttributeSet};
use crate::protocol::{
    assess, ca_setup, compose_zone_message, FirearmKeyBundle, OutcomeKind, ProtocolError, SzaState,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PERIOD: u64 = 5;
pub const DEFAULT_EPOCH: u64 = 1_700_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn default_period() -> u64 {
    DEFAULT_PERIOD
}

fn default_window() -> u64 {
    DEFAULT_WINDOW
}

fn default_epoch() -> u64 {
    DEFAULT_EPOCH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneSpec {
    pub sza_id: u32,
    /// Meters.
    pub position: (f64, f64),
    pub radius: f64,
    pub policy: String,
    #[serde(default = "default_period")]
    pub period: u64,
    #[serde(default)]
    pub clock_offset: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirearmSpec {
    pub firearm_id: u64,
    #[serde(default)]
    pub user_id: Option<u64>,
    pub attributes: Vec<String>,
    /// Key expiration, POSIX seconds.
    pub et: u64,
    /// `(t, x, y)` with strictly increasing `t`, seconds since scenario start.
    pub path: Vec<(f64, f64, f64)>,
    #[serde(default)]
    pub clock_offset: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub szsim: u32,
    pub duration: u64,
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window: u64,
    /// POSIX time of simulation start; also the key issuance time.
    #[serde(default = "default_epoch")]
    pub epoch: u64,
    pub universe: Vec<String>,
    pub zones: Vec<ZoneSpec>,
    pub firearms: Vec<FirearmSpec>,
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::ScenarioInvalid(msg.into())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn universe_set(&self) -> Result<AttributeSet, SimError> {
        AttributeSet::from_names(self.universe.iter().cloned()).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.szsim != SCHEMA_VERSION {
            return Err(invalid(format!("unsupported schema version {}", self.szsim)));
        }
        if self.window == 0 {
            return Err(invalid("window must be positive"));
        }
        let universe = self.universe_set()?;
        let mut ids = BTreeSet::new();
        for z in &self.zones {
            if !ids.insert(z.sza_id) {
                return Err(invalid(format!("duplicate sza_id {}", z.sza_id)));
            }
            if !(z.radius.is_finite() && z.radius > 0.0) {
                return Err(invalid(format!("zone {}: radius must be positive", z.sza_id)));
            }
            if !(z.position.0.is_finite() && z.position.1.is_finite()) {
                return Err(invalid(format!("zone {}: position must be finite", z.sza_id)));
            }
            if z.period == 0 {
                return Err(invalid(format!("zone {}: period must be positive", z.sza_id)));
            }
            self.check_clock(z.clock_offset, &format!("zone {}", z.sza_id))?;
            let tree = parse_policy(&z.policy).map_err(|e| invalid(format!("zone {}: {e}", z.sza_id)))?;
            if let Some(a) = tree.leaves().into_iter().find(|a| !universe.contains(a)) {
                return Err(invalid(format!("zone {}: attribute {a} not in universe", z.sza_id)));
            }
        }
        let mut ids = BTreeSet::new();
        for f in &self.firearms {
            let who = format!("firearm {}", f.firearm_id);
            if !ids.insert(f.firearm_id) {
                return Err(invalid(format!("duplicate firearm_id {}", f.firearm_id)));
            }
            let attrs = AttributeSet::from_names(f.attributes.iter().cloned())
                .map_err(|e| invalid(format!("{who}: {e}")))?;
            if attrs.is_empty() {
                return Err(invalid(format!("{who}: no attributes")));
            }
            if let Some(a) = attrs.iter().find(|a| !universe.contains(a)) {
                return Err(invalid(format!("{who}: attribute {a} not in universe")));
            }
            if f.et <= self.epoch {
                return Err(invalid(format!("{who}: et must be after the scenario epoch")));
            }
            if f.path.is_empty() {
                return Err(invalid(format!("{who}: empty path")));
            }
            if f.path.iter().any(|&(t, x, y)| !(t.is_finite() && x.is_finite() && y.is_finite())) {
                return Err(invalid(format!("{who}: non-finite waypoint")));
            }
            if f.path.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(invalid(format!("{who}: waypoint times must strictly increase")));
            }
            self.check_clock(f.clock_offset, &who)?;
        }
        Ok(())
    }

    fn check_clock(&self, offset: i64, who: &str) -> Result<(), SimError> {
        let start = self.epoch as i128 + offset as i128;
        let end = start + self.duration as i128;
        if start < 0 || end > u64::MAX as i128 {
            return Err(invalid(format!("{who}: clock offset leaves the u64 range")));
        }
        Ok(())
    }
}

/// Piecewise-linear position; held at the first/last waypoint outside the path span.
pub fn position_at(spec: &FirearmSpec, t: f64) -> (f64, f64) {
    let path = &spec.path;
    let first = path[0];
    let last = path[path.len() - 1];
    if t <= first.0 {
        return (first.1, first.2);
    }
    if t >= last.0 {
        return (last.1, last.2);
    }
    // index of the first waypoint strictly after t
    let i = path.partition_point(|w| w.0 <= t);
    let (t0, x0, y0) = path[i - 1];
    let (t1, x1, y1) = path[i];
    let u = (t - t0) / (t1 - t0);
    (x0 + u * (x1 - x0), y0 + u * (y1 - y0))
}

fn local_clock(epoch: u64, t: u64, offset: i64) -> u64 {
    (epoch as i128 + t as i128 + offset as i128) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// True simulation time of the beacon, seconds since start.
    pub t: u64,
    pub sza_id: u32,
    pub firearm_id: u64,
    pub distance: f64,
    /// Timestamp carried by the message (zone clock).
    pub ts: u64,
    /// Firearm clock at assessment.
    pub local_time: u64,
    pub outcome: OutcomeKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub records: Vec<Record>,
}

fn beacon_rng(seed: u64, sza_id: u32, k: u64) -> ChaCha20Rng {
    let mut input = Vec::with_capacity(20);
    input.extend_from_slice(&seed.to_be_bytes());
    input.extend_from_slice(&sza_id.to_be_bytes());
    input.extend_from_slice(&k.to_be_bytes());
    ChaCha20Rng::from_seed(kdf(&input, b"SZ-SIM-BEACON"))
}

/// Runs the scenario. Identical scenarios give identical logs.
pub fn run(scenario: &Scenario) -> Result<EventLog, SimError> {
    scenario.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
    let mut ca = ca_setup(scenario.universe_set()?, scenario.window, &mut rng)?;

    let mut zones: Vec<&ZoneSpec> = scenario.zones.iter().collect();
    zones.sort_by_key(|z| z.sza_id);
    let mut szas = Vec::with_capacity(zones.len());
    for z in &zones {
        let policy = parse_policy(&z.policy).map_err(|e| invalid(e.to_string()))?;
        szas.push(SzaState::enroll(&mut ca, z.sza_id, policy, &mut rng)?);
    }

    let mut firearms: Vec<&FirearmSpec> = scenario.firearms.iter().collect();
    firearms.sort_by_key(|f| f.firearm_id);
    let mut bundles: Vec<FirearmKeyBundle> = Vec::with_capacity(firearms.len());
    for f in &firearms {
        let attrs = AttributeSet::from_names(f.attributes.iter().cloned()).map_err(|e| invalid(e.to_string()))?;
        let user_id = f.user_id.unwrap_or(f.firearm_id);
        bundles.push(ca.firearm_register(&attrs, f.firearm_id, user_id, f.et, scenario.epoch, &mut rng)?);
    }

    let mut beacons: Vec<(u64, usize, u64)> = Vec::new();
    for (zi, z) in zones.iter().enumerate() {
        let mut k = 0u64;
        while let Some(t) = k.checked_mul(z.period).filter(|&t| t <= scenario.duration) {
            beacons.push((t, zi, k));
            k += 1;
        }
    }
    // zones are already in sza_id order, so zone index breaks ties
    beacons.sort();

    let mut records = Vec::new();
    for (t, zi, k) in beacons {
        let zone = zones[zi];
        let sza = &szas[zi];
        let ts = local_clock(scenario.epoch, t, zone.clock_offset);
        let msg = compose_zone_message(sza, ts, &mut beacon_rng(scenario.seed, zone.sza_id, k))?;
        for (spec, bundle) in firearms.iter().zip(&bundles) {
            let (x, y) = position_at(spec, t as f64);
            let distance = (x - zone.position.0).hypot(y - zone.position.1);
            if distance > zone.radius {
                continue;
            }
            let local_time = local_clock(scenario.epoch, t, spec.clock_offset);
            let outcome = assess(bundle, &msg, local_time);
            records.push(Record {
                t,
                sza_id: zone.sza_id,
                firearm_id: spec.firearm_id,
                distance,
                ts,
                local_time,
                outcome: outcome.kind,
                detail: outcome.detail,
            });
        }
    }
    Ok(EventLog { records })
}

/// Outcome counts, keyed by every outcome kind (zeros included).
pub type Counts = BTreeMap<OutcomeKind, usize>;

fn zero_counts() -> Counts {
    OutcomeKind::ALL.iter().map(|&k| (k, 0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub outcomes: Counts,
    pub per_zone: BTreeMap<u32, Counts>,
    pub per_firearm: BTreeMap<u64, Counts>,
}

pub fn report(log: &EventLog) -> Summary {
    let mut summary = Summary {
        total: log.records.len(),
        outcomes: zero_counts(),
        per_zone: BTreeMap::new(),
        per_firearm: BTreeMap::new(),
    };
    for r in &log.records {
        *summary.outcomes.entry(r.outcome).or_default() += 1;
        *summary.per_zone.entry(r.sza_id).or_insert_with(zero_counts).entry(r.outcome).or_default() += 1;
        *summary
            .per_firearm
            .entry(r.firearm_id)
            .or_insert_with(zero_counts)
            .entry(r.outcome)
            .or_default() += 1;
    }
    summary
}

fn counts_line(counts: &Counts) -> String {
    counts.iter().map(|(k, n)| format!("{k}={n}")).collect::<Vec<_>>().join(" ")
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "records {}", self.total).unwrap();
        writeln!(out, "all {}", counts_line(&self.outcomes)).unwrap();
        for (id, c) in &self.per_zone {
            writeln!(out, "zone {id} {}", counts_line(c)).unwrap();
        }
        for (id, c) in &self.per_firearm {
            writeln!(out, "firearm {id} {}", counts_line(c)).unwrap();
        }
        out
    }
}

#[derive(Serialize)]
struct RecordLine<'a> {
    szsim: u32,
    #[serde(flatten)]
    record: &'a Record,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    szsim: u32,
    summary: &'a Summary,
}

/// One JSON record per line, then a summary line.
pub fn write_log(log: &EventLog) -> String {
    let mut out = String::new();
    for record in &log.records {
        out.push_str(&serde_json::to_string(&RecordLine { szsim: SCHEMA_VERSION, record }).expect("record serializes"));
        out.push('\n');
    }
    let summary = report(log);
    out.push_str(
        &serde_json::to_string(&SummaryLine { szsim: SCHEMA_VERSION, summary: &summary }).expect("summary serializes"),
    );
    out.push('\n');
    out
}
