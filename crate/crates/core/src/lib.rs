//! Secure zone broadcast authorization.
//!
//! A central authority issues attribute-based keys to firearms and
//! certificates to zone authorities. Each zone broadcasts a one-way message
//! whose outer layer is encrypted under the zone's access policy and whose
//! inner layer carries a time-windowed token, a timestamp and a certified
//! signature. A firearm's agent runs a fixed sequence of checks on each
//! received message and reports an [`protocol::AdvisoryOutcome`].
//!
//! Modules, bottom-up:
//!
//! * [`policy`]: access-tree policies, parsing and evaluation.
//! * [`field`], [`sharing`], [`group`], [`abe`]: the ciphertext-policy ABE layer.
//! * [`crypto`]: hash, token authenticator, KDF, AEAD and signatures.
//! * [`protocol`]: authority/zone/firearm roles and the message pipeline.
//! * [`sim`]: deterministic simulation of mobile receivers and zone beacons.
//!
//! The default pairing backend is [`group::TransparentGroup`], which is
//! deliberately insecure and only suitable for testing and experiments.

pub mod abe;
pub mod crypto;
pub mod field;
pub mod group;
pub mod policy;
pub mod protocol;
pub mod sharing;
pub mod sim;
pub mod wire;
