//! Deterministic simulated permissioned ledger for NFT-backed patents.

pub mod certs;
pub mod codec;
pub mod consensus;
pub mod content_store;
pub mod crypto;
pub mod identity;
pub mod ledger;
pub mod market;
pub mod poe;
pub mod scenario;
pub mod token;
