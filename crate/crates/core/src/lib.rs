//! Finite-key security analysis, photonic simulation and topology planning
//! for twin-field QKD networks.
//!
//! The crate is organised around the life of a key-generation session:
//!
//! * [`photon`] produces detection statistics, either as expected tallies or
//!   by per-pulse Monte-Carlo sampling, and runs bit-level actively
//!   odd-parity pairing (AOPP) on the resulting raw keys.
//! * [`sns`] turns those statistics into a finite-key secure key rate for the
//!   three-intensity sending-or-not-sending (SNS) protocol.
//! * [`netplan`] models the network node (optical switch plus multi-user
//!   measurement units) and aggregates per-pair rates network wide.
//! * [`paramopt`] searches the protocol parameters for the best rate at a
//!   given channel.
//! * [`formats`] holds the versioned JSON file schemas shared with the CLI.

pub mod error;
pub mod formats;
pub mod netplan;
pub mod paramopt;
pub mod photon;
pub mod sns;

pub use error::{Error, Result};
