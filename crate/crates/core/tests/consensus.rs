use patent_ledger::consensus::{
    run_trial, validator_genesis, Behavior, Cluster, ClusterConfig, FaultModel, LinkFault, TrialConfig,
};
use patent_ledger::crypto::KeyPair;
use patent_ledger::identity::username_of;
use patent_ledger::ledger::{quorum, Op, Transaction};
use patent_ledger::token::Standard;

fn cluster(n: usize, seed: u64) -> Cluster {
    let (genesis, keys) = validator_genesis(n, seed, Standard::Algorand);
    Cluster::new(&genesis, keys, Standard::Algorand, ClusterConfig::new(seed)).unwrap()
}

fn registration(seed: u64, label: &str) -> Transaction {
    let key = KeyPair::derive(seed, label);
    Transaction::new(&key, &username_of(&key.public_key()), 0, &Op::RegisterIdentity { public_key: key.public_key() })
}

#[test]
fn honest_block_commits_within_one_round_with_all_votes() {
    let mut c = cluster(4, 1);
    c.submit(&registration(1, "alice"));
    let round = c.config().ticks_per_round;
    assert!(c.run_until(round, |c| c.min_honest_height() == 2));
    let block = &c.reference().ledger().blocks()[1];
    assert_eq!(block.votes.len(), 4);
    assert!(c.conflicts().is_empty());
}

#[test]
fn one_silent_validator_still_reaches_quorum() {
    let mut c = cluster(4, 2);
    c.set_behavior(3, Behavior::Silent);
    for i in 0..4 {
        c.submit(&registration(2, &format!("user-{i}")));
        assert!(c.run_until(200, |c| c.min_honest_height() == 2 + i));
    }
    for node in c.honest() {
        for block in &node.ledger().blocks()[1..] {
            assert!(block.votes.len() >= quorum(4));
        }
    }
}

#[test]
fn two_withholding_validators_of_four_block_every_commit() {
    let mut c = cluster(4, 3);
    c.set_behavior(0, Behavior::Equivocate);
    c.set_behavior(1, Behavior::Equivocate);
    c.submit(&registration(3, "alice"));
    c.run_for(300);
    assert_eq!(c.max_honest_height(), 1);
    assert!(c.conflicts().is_empty());
}

#[test]
fn crashed_replica_catches_up_after_recovery() {
    let mut c = cluster(4, 4);
    c.set_behavior(3, Behavior::Silent);
    for i in 0..3 {
        c.submit(&registration(4, &format!("user-{i}")));
        assert!(c.run_until(200, |c| c.min_honest_height() == 2 + i));
    }
    assert_eq!(c.node(3).height(), 1);
    c.set_behavior(3, Behavior::Honest);
    c.submit(&registration(4, "late"));
    assert!(c.run_until(200, |c| c.min_honest_height() == 5 && c.honest().all(|n| n.mempool().is_empty())));
    assert!(c.conflicts().is_empty());
    let hashes: Vec<_> = c.honest().map(|n| n.ledger().state().state_hash()).collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn dropped_messages_never_split_commits() {
    for seed in 0..10 {
        let mut c = cluster(4, seed);
        c.network_mut().add_fault(LinkFault::Drop { from: None, start: 0, count: 25 });
        for i in 0..3 {
            c.submit(&registration(seed, &format!("user-{i}")));
        }
        c.run_for(200);
        assert!(c.conflicts().is_empty(), "seed {seed}");
    }
}

#[test]
fn trials_are_reproducible() {
    let config = TrialConfig::new(4, 1, 17);
    assert_eq!(run_trial(&config), run_trial(&config));
}

#[test]
fn safety_with_tolerated_faults_across_seeds() {
    for n in [4usize, 7] {
        let f = (n - 1) / 3;
        for seed in 0..20 {
            let outcome = run_trial(&TrialConfig::new(n, f, seed));
            assert!(outcome.conflicts.is_empty(), "n={n} seed={seed}: {:?}", outcome.conflicts);
        }
    }
}

#[test]
fn withholding_beyond_tolerance_commits_nothing() {
    for n in [4usize, 7] {
        let f = (n - 1) / 3;
        for seed in 0..10 {
            let mut config = TrialConfig::new(n, f + 1, seed);
            config.model = FaultModel::Withholding;
            let outcome = run_trial(&config);
            assert_eq!(outcome.max_new_commits(), 0, "n={n} seed={seed}");
        }
    }
}
