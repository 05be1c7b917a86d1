use crate::crypto::KeyPair;
use crate::token::Standard;

use super::block::Block;
use super::state::{LedgerState, Receipt, TxError};
use super::tx::{Op, Transaction};

/// Collects the transactions of block 0, checking each against the state the
/// previous ones produce.
#[derive(Debug, Clone)]
pub struct GenesisBuilder {
    state: LedgerState,
    txs: Vec<Transaction>,
    tick: u64,
}

impl GenesisBuilder {
    pub fn new(profile: Standard) -> Self {
        Self {
            state: LedgerState::new(profile),
            txs: Vec::new(),
            tick: 0,
        }
    }

    pub fn at_tick(mut self, tick: u64) -> Self {
        self.tick = tick;
        self
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    /// Signs `op` as `author` with the next sequence number and appends it.
    pub fn push(&mut self, key_pair: &KeyPair, author: &str, op: Op) -> Result<Receipt, TxError> {
        let tx = Transaction::new(key_pair, author, self.state.next_sequence(author), &op);
        self.push_tx(tx)
    }

    pub fn push_tx(&mut self, tx: Transaction) -> Result<Receipt, TxError> {
        let receipt = self.state.stage_tx(&tx, self.tick, None)?;
        self.txs.push(tx);
        Ok(receipt)
    }

    pub fn build(self) -> Block {
        Block::genesis(self.tick, self.txs)
    }
}
