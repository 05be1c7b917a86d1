//! Voting consensus among certified validators, simulated on a seeded
//! discrete-event network.
//!
//! The leader for `(height, view)` is the active validator at index
//! `(height + view) mod n` in username order. It proposes a block of pending
//! transactions; every honest validator that can apply the block votes for it,
//! at most one block per height, and a block commits once `quorum(n)` votes
//! for its id are collected. A view that makes no progress times out and the
//! next validator leads, re-proposing any block it already voted for.

mod cluster;
mod network;
mod node;
mod trial;

pub use cluster::{Cluster, ClusterConfig};
pub use network::{Envelope, LinkFault, NetworkConfig, NetworkStats, NodeId, SimNetwork};
pub use node::{Behavior, Context, Message, Node, Outgoing};
pub use trial::{run_trial, validator_genesis, FaultModel, TrialConfig, TrialOutcome};
