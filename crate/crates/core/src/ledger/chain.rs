//! Committed chains, the hex dump format, replay and audit.

use std::fmt;

use thiserror::Error;

use crate::codec::Canonical;
use crate::content_store::ContentStore;
use crate::crypto::Digest;
use crate::token::Standard;

use super::block::Block;
use super::state::{BlockError, LedgerState, Receipt};

/// A replica's committed blocks and the state they produce.
#[derive(Debug, Clone)]
pub struct Ledger {
    blocks: Vec<Block>,
    state: LedgerState,
    receipts: Vec<Vec<Receipt>>,
}

impl Ledger {
    pub fn new(profile: Standard) -> Self {
        Self {
            blocks: Vec::new(),
            state: LedgerState::new(profile),
            receipts: Vec::new(),
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn receipts(&self, height: u64) -> Option<&[Receipt]> {
        self.receipts.get(height as usize).map(Vec::as_slice)
    }

    pub fn height(&self) -> u64 {
        self.state.next_height()
    }

    pub fn append(&mut self, block: Block, store: Option<&ContentStore>) -> Result<&[Receipt], BlockError> {
        let receipts = self.state.apply_block(&block, store)?;
        self.blocks.push(block);
        self.receipts.push(receipts);
        Ok(self.receipts.last().expect("just pushed"))
    }

    pub fn dump(&self) -> String {
        dump_blocks(&self.blocks)
    }
}

/// One lowercase hex line of canonical bytes per block, each newline
/// terminated.
pub fn dump_blocks(blocks: &[Block]) -> String {
    let mut out = String::new();
    for block in blocks {
        out.push_str(&hex::encode(block.to_canonical_bytes()));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DumpError {
    #[error("corrupt dump: {0}")]
    CorruptDump(String),
}

/// Splits a dump into per-line block bytes. Structural damage to the file
/// (empty, truncated final line, non-hex text) is a [`DumpError`]; bytes
/// that fail to decode as a block are left for the per-height audit.
pub fn split_dump(text: &str) -> Result<Vec<Vec<u8>>, DumpError> {
    if text.is_empty() {
        return Err(DumpError::CorruptDump("empty file".into()));
    }
    if !text.ends_with('\n') {
        return Err(DumpError::CorruptDump("final line is truncated".into()));
    }
    text.lines()
        .enumerate()
        .map(|(line, hex_text)| {
            hex::decode(hex_text)
                .map_err(|e| DumpError::CorruptDump(format!("line {}: {e}", line + 1)))
        })
        .collect()
}

/// Parses and strictly replays a dump from genesis.
pub fn replay_dump(text: &str, profile: Standard) -> Result<Ledger, ReplayError> {
    let lines = split_dump(text)?;
    let mut ledger = Ledger::new(profile);
    for (height, bytes) in lines.iter().enumerate() {
        let height = height as u64;
        let block = Block::from_canonical_bytes(bytes).map_err(|e| ReplayError::Block {
            height,
            reason: format!("undecodable block: {e}"),
        })?;
        ledger.append(block, None).map_err(|e| ReplayError::Block {
            height,
            reason: e.to_string(),
        })?;
    }
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("block {height}: {reason}")]
    Block { height: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub height: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub blocks: u64,
    pub violations: Vec<Violation>,
    /// State after the longest clean prefix.
    pub state_hash: Digest,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violating_heights(&self) -> Vec<u64> {
        self.violations.iter().map(|v| v.height).collect()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "blocks: {}", self.blocks)?;
        writeln!(f, "state hash: {}", self.state_hash)?;
        if self.violations.is_empty() {
            return writeln!(f, "audit: clean");
        }
        writeln!(f, "audit: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  height {}: {}", v.height, v.reason)?;
        }
        Ok(())
    }
}

/// Recomputes every hash link, vote signature, quorum and state transition.
/// The first failing block is reported with its reason; every later block
/// builds on it and is reported as tainted.
pub fn audit_dump(text: &str, profile: Standard) -> Result<AuditReport, DumpError> {
    let lines = split_dump(text)?;
    let mut state = LedgerState::new(profile);
    let mut violations = Vec::new();
    for (height, bytes) in lines.iter().enumerate() {
        let height = height as u64;
        if let Some(first) = violations.first() {
            let Violation { height: bad, .. } = first;
            violations.push(Violation {
                height,
                reason: format!("descends from invalid block {bad}"),
            });
            continue;
        }
        let outcome = Block::from_canonical_bytes(bytes)
            .map_err(|e| format!("undecodable block: {e}"))
            .and_then(|block| state.apply_block(&block, None).map_err(|e| e.to_string()));
        if let Err(reason) = outcome {
            violations.push(Violation { height, reason });
        }
    }
    Ok(AuditReport {
        blocks: lines.len() as u64,
        violations,
        state_hash: state.state_hash(),
    })
}
