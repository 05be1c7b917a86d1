//! Block-level harness: a ledger driven directly, with every validator
//! signing each block, so tests can exercise state transitions without the
//! network simulation.

#![allow(dead_code)]

pub mod tokens;

use std::collections::BTreeMap;
use std::path::PathBuf;

use patent_ledger::consensus::validator_genesis;
use patent_ledger::content_store::ContentStore;
use patent_ledger::crypto::KeyPair;
use patent_ledger::identity::username_of;
use patent_ledger::ledger::{Block, BlockError, Ledger, Op, Receipt, Transaction, Vote};
use patent_ledger::token::Standard;

pub struct TestChain {
    pub ledger: Ledger,
    pub store: ContentStore,
    pub validators: Vec<(KeyPair, String)>,
    pub seed: u64,
    tick: u64,
    /// Sequence numbers handed out but not yet committed.
    reserved: BTreeMap<String, u64>,
}

impl TestChain {
    pub fn new(n: usize, seed: u64, profile: Standard) -> Self {
        let (genesis, keys) = validator_genesis(n, seed, profile);
        let mut ledger = Ledger::new(profile);
        ledger.append(genesis, None).expect("genesis applies");
        let validators = keys
            .into_iter()
            .map(|k| {
                let name = username_of(&k.public_key());
                (k, name)
            })
            .collect();
        Self {
            ledger,
            store: ContentStore::new(),
            validators,
            seed,
            tick: 0,
            reserved: BTreeMap::new(),
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Signs `op` with the author's next unused sequence number.
    pub fn tx(&mut self, key: &KeyPair, author: &str, op: Op) -> Transaction {
        let next = self.ledger.state().next_sequence(author);
        let seq = self.reserved.entry(author.to_owned()).or_insert(next);
        *seq = (*seq).max(next);
        let tx = Transaction::new(key, author, *seq, &op);
        *seq += 1;
        tx
    }

    /// Builds the next block over `txs` with a vote from every validator.
    pub fn block(&self, txs: Vec<Transaction>) -> Block {
        let height = self.ledger.height();
        let proposer = &self.validators[height as usize % self.validators.len()].1;
        let mut block = Block {
            height,
            prev_hash: self.ledger.state().tip(),
            tick: self.tick + 1,
            proposer: proposer.clone(),
            txs,
            votes: Vec::new(),
        };
        let id = block.block_id();
        block.votes = self
            .validators
            .iter()
            .map(|(k, name)| Vote::cast(k, name, height, &id))
            .collect();
        block
    }

    pub fn seal(&mut self, txs: Vec<Transaction>) -> Result<Vec<Receipt>, BlockError> {
        let block = self.block(txs);
        let result = self.ledger.append(block, Some(&self.store)).map(<[Receipt]>::to_vec);
        match &result {
            Ok(_) => self.tick += 1,
            Err(_) => self.reserved.clear(),
        }
        result
    }

    /// One transaction in its own block.
    pub fn run(&mut self, key: &KeyPair, author: &str, op: Op) -> Result<Receipt, BlockError> {
        let tx = self.tx(key, author, op);
        self.seal(vec![tx]).map(|mut r| r.remove(0))
    }

    pub fn empty_block(&mut self) {
        self.seal(Vec::new()).expect("empty block applies");
    }

    /// Registers a fresh identity derived from `label`.
    pub fn user(&mut self, label: &str) -> (KeyPair, String) {
        let key = KeyPair::derive(self.seed, label);
        let name = username_of(&key.public_key());
        self.run(&key, &name, Op::RegisterIdentity { public_key: key.public_key() })
            .expect("fresh identity");
        (key, name)
    }
}

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Every bundled script, sorted by name.
pub fn scenario_paths() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .expect("scenarios directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    paths.sort();
    paths
}
