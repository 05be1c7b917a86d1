//! Permissioned ledger: signed transactions, quorum-certified blocks, the
//! replicated state they drive, and patent examination.

mod block;
mod chain;
mod evidence;
pub mod examination;
mod genesis;
mod state;
mod tx;
mod validators;

pub use block::{Block, Vote};
pub use chain::{
    audit_dump, dump_blocks, replay_dump, split_dump, AuditReport, DumpError, Ledger, ReplayError,
    Violation,
};
pub use evidence::{dispute_report, DisputeReport};
pub use genesis::GenesisBuilder;
pub use examination::{
    quorum, tally, Ballot, Checks, Decision, ExamError, PatentSubmission, SubmissionStatus, Verdict,
    EXAMINATION_TIMEOUT_BLOCKS, TIMEOUT_COMMENT,
};
pub use state::{BlockError, LedgerState, Receipt, TxError};
pub use tx::{Op, Transaction, TxKind};
pub use validators::{AdmissionError, ValidatorSet};
