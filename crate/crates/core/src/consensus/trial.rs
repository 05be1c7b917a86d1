//! Seeded fault trials over a fresh validator cluster.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certs::CertificateAuthority;
use crate::crypto::KeyPair;
use crate::identity::username_of;
use crate::ledger::{GenesisBuilder, Op, Transaction};
use crate::token::Standard;

use super::cluster::{Cluster, ClusterConfig};
use super::network::NetworkConfig;
use super::node::Behavior;

/// Which behaviours the faulty validators draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultModel {
    /// Each faulty node is, per seed, silent, equivocating or double-voting.
    Mixed,
    /// Every faulty node equivocates and withholds valid votes.
    Withholding,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub validators: usize,
    pub byzantine: usize,
    pub model: FaultModel,
    pub seed: u64,
    pub transactions: usize,
    pub network: NetworkConfig,
    pub max_ticks: u64,
}

impl TrialConfig {
    pub fn new(validators: usize, byzantine: usize, seed: u64) -> Self {
        Self {
            validators,
            byzantine,
            model: FaultModel::Mixed,
            seed,
            transactions: 8,
            network: NetworkConfig::default(),
            max_ticks: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub byzantine: Vec<(String, Behavior)>,
    /// Blocks beyond genesis on each honest replica.
    pub honest_commits: Vec<u64>,
    pub conflicts: Vec<String>,
    pub ticks: u64,
}

impl TrialOutcome {
    pub fn max_new_commits(&self) -> u64 {
        self.honest_commits.iter().copied().max().unwrap_or(0)
    }
}

/// Genesis with `n` certified validators and their keys, in creation order.
pub fn validator_genesis(n: usize, seed: u64, profile: Standard) -> (crate::ledger::Block, Vec<KeyPair>) {
    let office_key = KeyPair::derive(seed, "office");
    let mut office = CertificateAuthority::new("office", office_key.clone());
    let mut genesis = GenesisBuilder::new(profile);
    genesis
        .push(
            &office_key,
            "office",
            Op::RegisterAuthority {
                name: "office".into(),
                public_key: office_key.public_key(),
            },
        )
        .expect("fresh authority");
    let keys: Vec<KeyPair> = (0..n).map(|i| KeyPair::derive(seed, &format!("validator-{i}"))).collect();
    for key in &keys {
        let name = username_of(&key.public_key());
        genesis
            .push(key, &name, Op::RegisterIdentity { public_key: key.public_key() })
            .expect("fresh identity");
        let certificate = office
            .issue_certificate(&name, key.public_key(), 0, u64::MAX)
            .expect("non-empty validity");
        genesis
            .push(key, &name, Op::AdmitValidator { certificate })
            .expect("valid certificate");
    }
    (genesis.build(), keys)
}

/// Runs a cluster under a random fault assignment and a stream of identity
/// registrations, then reports what each honest replica committed.
pub fn run_trial(config: &TrialConfig) -> TrialOutcome {
    let (genesis, keys) = validator_genesis(config.validators, config.seed, Standard::Algorand);
    let mut cluster = Cluster::new(
        &genesis,
        keys,
        Standard::Algorand,
        ClusterConfig {
            seed: config.seed,
            ticks_per_round: 6,
            network: config.network,
        },
    )
    .expect("genesis applies");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut ids: Vec<usize> = (0..config.validators).collect();
    ids.shuffle(&mut rng);
    let mut byzantine = Vec::new();
    for &id in ids.iter().take(config.byzantine) {
        let behavior = match config.model {
            FaultModel::Withholding => Behavior::Equivocate,
            FaultModel::Mixed => *[Behavior::Silent, Behavior::Equivocate, Behavior::DoubleVote]
                .choose(&mut rng)
                .expect("non-empty"),
        };
        cluster.set_behavior(id, behavior);
        byzantine.push((cluster.node(id).name().to_owned(), behavior));
    }
    let clients: Vec<KeyPair> = (0..config.transactions)
        .map(|i| KeyPair::derive(config.seed, &format!("client-{i}")))
        .collect();
    let round = cluster.config().ticks_per_round;
    let mut next_client = 0;
    let mut ticks = 0;
    while ticks < config.max_ticks {
        if next_client < clients.len() && ticks % round == 0 && rng.gen_bool(0.75) {
            let key = &clients[next_client];
            let name = username_of(&key.public_key());
            cluster.submit(&Transaction::new(key, &name, 0, &Op::RegisterIdentity { public_key: key.public_key() }));
            next_client += 1;
        }
        cluster.step();
        ticks += 1;
        let all_in = next_client == clients.len()
            && cluster
                .honest()
                .all(|n| n.mempool().is_empty() && n.ledger().state().identities().len() >= config.validators + clients.len());
        if all_in {
            break;
        }
    }
    TrialOutcome {
        byzantine,
        honest_commits: cluster.honest().map(|n| n.height() - 1).collect(),
        conflicts: cluster.conflicts(),
        ticks,
    }
}
