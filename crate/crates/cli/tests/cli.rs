use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const T: u64 = 1_700_000_000;

fn szctl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szctl")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("szctl-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

/// CA, one zone requiring `officer`, one officer firearm, one broadcast at `T`.
fn ceremony(dir: &Path) {
    ok(szctl(dir, &["ca", "init", "--seed", "42"]));
    ok(szctl(dir, &["sza", "register", "--id", "3", "--policy", "officer", "--seed", "7", "--cert-out", "sza.szcrt"]));
    ok(szctl(dir, &["firearm", "register", "--attr", "officer", "--expires", "2000000000", "--seed", "9"]));
    ok(szctl(dir, &["zone", "broadcast", "--at", &T.to_string(), "--seed", "1"]));
}

fn demo_scenario() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/demo_scenario.json")
}

#[test]
fn ca_init_is_deterministic() {
    let a = workdir("det-a");
    let b = workdir("det-b");
    ok(szctl(&a, &["ca", "init", "--seed", "42"]));
    ok(szctl(&b, &["ca", "init", "--seed", "42"]));
    assert_eq!(std::fs::read(a.join("ca.szca")).unwrap(), std::fs::read(b.join("ca.szca")).unwrap());
    ok(szctl(&b, &["ca", "init", "--seed", "43"]));
    assert_ne!(std::fs::read(a.join("ca.szca")).unwrap(), std::fs::read(b.join("ca.szca")).unwrap());
}

#[test]
fn inspect_echoes_bundle_fields() {
    let dir = workdir("inspect");
    ok(szctl(&dir, &["ca", "init", "--seed", "1"]));
    ok(szctl(
        &dir,
        &["firearm", "register", "--attr", "officer", "--attr", "licensed", "--expires", "2000000000",
          "--firearm-id", "17", "--user-id", "99", "--seed", "2"],
    ));
    let out = stdout(&ok(szctl(&dir, &["inspect", "firearm.sztpd"])));
    for line in ["type bundle", "firearm_id 17", "user_id 99", "attributes licensed,officer", "expires 2000000000", "window 30"] {
        assert!(out.lines().any(|l| l == line), "missing {line:?} in\n{out}");
    }
}

#[test]
fn inspect_describes_every_file_kind() {
    let dir = workdir("inspect-all");
    ceremony(&dir);
    for (file, kind) in [("ca.szca", "ca"), ("sza.szsza", "sza"), ("sza.szcrt", "certificate"), ("zone.szm", "message")] {
        let out = stdout(&ok(szctl(&dir, &["inspect", file])));
        assert_eq!(out.lines().next(), Some(format!("type {kind}").as_str()));
    }
    let ca = stdout(&ok(szctl(&dir, &["inspect", "ca.szca"])));
    assert!(ca.contains("szas 3"));
}

#[test]
fn unknown_attribute_exits_3_and_names_it() {
    let dir = workdir("unknown");
    ok(szctl(&dir, &["ca", "init", "--seed", "1"]));
    let o = szctl(&dir, &["firearm", "register", "--attr", "pilot", "--expires", "2000000000", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "unknown_attribute");
    assert!(err["message"].as_str().unwrap().contains("pilot"));
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    let dir = workdir("usage");
    assert_eq!(szctl(&dir, &["ca", "init"]).status.code(), Some(2));
    assert_eq!(szctl(&dir, &["frobnicate"]).status.code(), Some(2));
    ok(szctl(&dir, &["ca", "init", "--seed", "1"]));
    let o = szctl(&dir, &["sza", "register", "--id", "1", "--policy", "officer and", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_state_file_exits_3() {
    let dir = workdir("missing");
    let o = szctl(&dir, &["zone", "broadcast", "--at", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn broadcast_then_assess_is_authorized() {
    let dir = workdir("authorized");
    ceremony(&dir);
    let o = ok(szctl(&dir, &["firearm", "assess", "--at", &(T + 10).to_string()]));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("AUTHORIZED "), "{out}");
}

#[test]
fn assess_an_hour_later_is_token_mismatch() {
    let dir = workdir("replay");
    ceremony(&dir);
    let o = szctl(&dir, &["firearm", "assess", "--at", &(T + 3600).to_string()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("TOKEN_MISMATCH "));
}

#[test]
fn policy_and_expiry_outcomes() {
    let dir = workdir("outcomes");
    ceremony(&dir);
    ok(szctl(&dir, &["firearm", "register", "--attr", "civilian", "--expires", "2000000000", "--seed", "4", "--out", "civ.sztpd"]));
    let o = szctl(&dir, &["firearm", "assess", "--bundle", "civ.sztpd", "--at", &T.to_string()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("POLICY_NOT_SATISFIED "));

    ok(szctl(&dir, &["firearm", "register", "--attr", "officer", "--expires", &(T - 1).to_string(), "--seed", "5", "--out", "old.sztpd"]));
    let o = szctl(&dir, &["firearm", "assess", "--bundle", "old.sztpd", "--at", &T.to_string()]);
    assert!(stdout(&o).starts_with("KEY_EXPIRED "));
}

#[test]
fn empty_message_is_malformed() {
    let dir = workdir("empty");
    ceremony(&dir);
    std::fs::write(dir.join("empty.szm"), b"").unwrap();
    let o = szctl(&dir, &["firearm", "assess", "--message", "empty.szm", "--at", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("MALFORMED "));
}

#[test]
fn tampered_messages_are_never_authorized() {
    let dir = workdir("tamper");
    ceremony(&dir);
    let len = std::fs::read(dir.join("zone.szm")).unwrap().len();
    let at = (T + 10).to_string();
    for byte in (0..len).step_by(7).chain([7, len - 1]) {
        let b = byte.to_string();
        ok(szctl(&dir, &["tamper", "--byte", &b, "--out", "bad.szm"]));
        let o = szctl(&dir, &["firearm", "assess", "--message", "bad.szm", "--at", &at]);
        assert_eq!(o.status.code(), Some(1), "byte {byte}: {}", stdout(&o));
        assert!(!stdout(&o).starts_with("AUTHORIZED"));
    }
    let o = szctl(&dir, &["tamper", "--byte", &len.to_string()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn broadcast_is_deterministic_per_seed_and_time() {
    let dir = workdir("broadcast");
    ceremony(&dir);
    let first = std::fs::read(dir.join("zone.szm")).unwrap();
    ok(szctl(&dir, &["zone", "broadcast", "--at", &T.to_string(), "--seed", "1", "--out", "again.szm"]));
    assert_eq!(std::fs::read(dir.join("again.szm")).unwrap(), first);
    ok(szctl(&dir, &["zone", "broadcast", "--at", &(T + 1).to_string(), "--seed", "1", "--out", "later.szm"]));
    assert_ne!(std::fs::read(dir.join("later.szm")).unwrap(), first);
}

#[test]
fn duplicate_sza_id_exits_3() {
    let dir = workdir("dup");
    ceremony(&dir);
    let o = szctl(&dir, &["sza", "register", "--id", "3", "--policy", "officer", "--seed", "8", "--out", "b.szsza"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_matches_golden_summary() {
    let dir = workdir("sim");
    let scenario = demo_scenario();
    let o = ok(szctl(&dir, &["simulate", "--scenario", scenario.to_str().unwrap(), "--out", "log.jsonl", "--summary", "summary.txt"]));
    let golden = std::fs::read_to_string(scenario.with_file_name("demo_summary.txt")).unwrap();
    assert_eq!(stdout(&o), golden);
    assert_eq!(std::fs::read_to_string(dir.join("summary.txt")).unwrap(), golden);
    let log = std::fs::read_to_string(dir.join("log.jsonl")).unwrap();
    assert!(log.lines().all(|l| l.starts_with("{\"szsim\":1,")));
}

#[test]
fn simulate_twice_gives_identical_logs() {
    let dir = workdir("sim-det");
    let scenario = demo_scenario();
    let s = scenario.to_str().unwrap();
    ok(szctl(&dir, &["simulate", "--scenario", s, "--out", "a.jsonl"]));
    ok(szctl(&dir, &["simulate", "--scenario", s, "--out", "b.jsonl"]));
    assert_eq!(std::fs::read(dir.join("a.jsonl")).unwrap(), std::fs::read(dir.join("b.jsonl")).unwrap());
}

#[test]
fn invalid_scenario_exits_3() {
    let dir = workdir("sim-bad");
    std::fs::write(dir.join("bad.json"), r#"{"szsim": 9}"#).unwrap();
    let o = szctl(&dir, &["simulate", "--scenario", "bad.json", "--out", "x.jsonl"]);
    assert_eq!(o.status.code(), Some(3));
}
