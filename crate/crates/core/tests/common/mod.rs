//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::Rng;
use sz_core::policy::{AccessTree, Attribute, AttributeSet, Node};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn universe(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("u{i}")).collect()
}

fn random_node<R: Rng>(rng: &mut R, depth: usize, universe: &[String], leaf_bias: f64) -> Node {
    if depth <= 1 || rng.gen_bool(leaf_bias) {
        let name = &universe[rng.gen_range(0..universe.len())];
        return Node::Leaf(Attribute::new(name.as_str()).unwrap());
    }
    let n = rng.gen_range(1..=4);
    let threshold = rng.gen_range(1..=n);
    let children = (0..n).map(|_| random_node(rng, depth - 1, universe, 0.45)).collect();
    Node::Gate { threshold, children }
}

/// Random tree with at most `depth` levels over `universe`.
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize, universe: &[String]) -> AccessTree {
    AccessTree::new(random_node(rng, depth, universe, 0.15)).unwrap()
}

pub type Clause = BTreeSet<String>;

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Disjunctive normal form by explicit expansion: a gate is the union over
/// every k-subset of children of the cross product of their clauses.
pub fn dnf(node: &Node) -> Vec<Clause> {
    match node {
        Node::Leaf(a) => vec![[a.as_str().to_string()].into_iter().collect()],
        Node::Gate { threshold, children } => {
            let child_dnfs: Vec<Vec<Clause>> = children.iter().map(dnf).collect();
            let mut out = Vec::new();
            for combo in combinations(children.len(), *threshold) {
                let mut acc: Vec<Clause> = vec![Clause::new()];
                for &c in &combo {
                    let mut next = Vec::new();
                    for partial in &acc {
                        for clause in &child_dnfs[c] {
                            next.push(partial.union(clause).cloned().collect());
                        }
                    }
                    acc = next;
                }
                out.extend(acc);
            }
            out.sort();
            out.dedup();
            out
        }
    }
}

pub fn dnf_satisfied(clauses: &[Clause], attrs: &BTreeSet<String>) -> bool {
    clauses.iter().any(|c| c.is_subset(attrs))
}

/// Every subset of `universe`, as both a name set and an `AttributeSet`.
pub fn all_subsets(universe: &[String]) -> Vec<(BTreeSet<String>, AttributeSet)> {
    (0u32..1 << universe.len())
        .map(|mask| {
            let names: BTreeSet<String> = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, n)| n.clone())
                .collect();
            let set = AttributeSet::from_names(names.iter().cloned()).unwrap();
            (names, set)
        })
        .collect()
}

/// Replays a fixed byte string as the randomness source, so sealing under a
/// known nonce can be compared with published ciphertexts.
pub struct Replay(pub Vec<u8>);

impl rand::RngCore for Replay {
    fn next_u32(&mut self) -> u32 {
        rand_core_fill_u32(self)
    }
    fn next_u64(&mut self) -> u64 {
        let mut b = [0u8; 8];
        self.fill_bytes(&mut b);
        u64::from_le_bytes(b)
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        assert!(dest.len() <= self.0.len(), "replay buffer exhausted");
        let rest = self.0.split_off(dest.len());
        dest.copy_from_slice(&self.0);
        self.0 = rest;
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

fn rand_core_fill_u32(r: &mut Replay) -> u32 {
    let mut b = [0u8; 4];
    rand::RngCore::fill_bytes(r, &mut b);
    u32::from_le_bytes(b)
}

fn unhex(v: &serde_json::Value) -> Vec<u8> {
    hex::decode(v.as_str().expect("hex string")).expect("valid hex")
}

/// Checks every vector in `kat_suite01.json`; returns the vector count or
/// the first mismatch.
pub fn run_kat() -> Result<usize, String> {
    use sz_core::crypto::{self, PublicKey, SealedBox, Signature, SigningKeypair, TokenSeed};
    use sz_core::group::{BilinearGroup, TransparentGroup};

    let text = std::fs::read_to_string(fixture("kat_suite01.json")).map_err(|e| e.to_string())?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let list = |k: &str| doc[k].as_array().cloned().unwrap_or_default();
    let mut count = 0;
    let fail = |section: &str, i: usize| Err(format!("{section}[{i}] mismatch"));

    if doc["suite"].as_u64() != Some(crypto::SUITE_ID as u64) {
        return Err("suite id".into());
    }
    for (i, v) in list("sha256").iter().enumerate() {
        let input = &unhex(&v["input"]);
        if crypto::hash(input).0.to_vec() != unhex(&v["digest"]) {
            return fail("sha256", i);
        }
        count += 1;
    }
    for (i, v) in list("token").iter().enumerate() {
        let seed = TokenSeed(unhex(&v["seed"]).try_into().unwrap());
        let t = crypto::token_at(&seed, v["time"].as_u64().unwrap(), v["window"].as_u64().unwrap())
            .map_err(|e| e.to_string())?;
        if t.window_index != v["window_index"].as_u64().unwrap() || t.tk.to_vec() != unhex(&v["tk"]) {
            return fail("token", i);
        }
        count += 1;
    }
    for (i, v) in list("kdf").iter().enumerate() {
        let key = crypto::kdf(&unhex(&v["input"]), v["label"].as_str().unwrap().as_bytes());
        if key.to_vec() != unhex(&v["key"]) {
            return fail("kdf", i);
        }
        count += 1;
    }
    for (i, v) in list("aead").iter().enumerate() {
        let key: [u8; 32] = unhex(&v["key"]).try_into().unwrap();
        let nonce = unhex(&v["nonce"]);
        let pt = unhex(&v["plaintext"]);
        let sealed = crypto::seal(&key, &pt, &mut Replay(nonce.clone()));
        if sealed.ciphertext != unhex(&v["ciphertext"]) || sealed.nonce.to_vec() != nonce {
            return fail("aead", i);
        }
        let reopened = SealedBox { nonce: sealed.nonce, ciphertext: unhex(&v["ciphertext"]) };
        if crypto::open(&key, &reopened).map_err(|e| e.to_string())? != pt {
            return fail("aead-open", i);
        }
        count += 1;
    }
    for (i, v) in list("ed25519").iter().enumerate() {
        let kp = SigningKeypair::from_secret(unhex(&v["secret"]).try_into().unwrap());
        let msg = unhex(&v["message"]);
        let expected = Signature::from_slice(&unhex(&v["signature"])).map_err(|e| e.to_string())?;
        let public = PublicKey::from_slice(&unhex(&v["public"])).map_err(|e| e.to_string())?;
        if kp.public() != public || kp.sign(&msg) != expected || !crypto::verify(&public, &msg, &expected) {
            return fail("ed25519", i);
        }
        count += 1;
    }
    let group = TransparentGroup;
    for (i, v) in list("hash_to_group").iter().enumerate() {
        let g = group.hash_to_g(v["attribute"].as_str().unwrap().as_bytes());
        if g.0.value() != v["exponent"].as_u64().unwrap() {
            return fail("hash_to_group", i);
        }
        count += 1;
    }
    Ok(count)
}
