//! Multi-standard token registry: fungible, non-fungible and semi-fungible
//! classes, operator approvals, atomic batch transfers and fractionalization.
//!
//! A registry runs under one [`Standard`] profile; operations the profile lacks
//! fail with [`TokenError::ProfileUnsupported`].

mod profile;
mod registry;

pub use profile::{conformance_matrix, render_matrix, ConformanceRow, Feature, Standard};
pub use registry::{
    ApprovalScope, Asset, BalanceEntry, FractionalizationRecord, Fungibility, Lock, NftId,
    TokenClass, TokenError, TokenInstance, TokenRegistry, SYSTEM_ACCOUNT,
};

#[cfg(test)]
mod tests;
