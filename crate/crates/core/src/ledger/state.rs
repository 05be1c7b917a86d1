use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::codec::CodecError;
use crate::content_store::{ContentId, ContentStore};
use crate::crypto::{sha256, Digest, PublicKey};
use crate::identity::{username_of, AuthError, IdentityRegistry};
use crate::market::{MarketBook, MarketError, RoyaltyDistribution, ROYALTY_POOL};
use crate::poe::{PoeBook, PoeError};
use crate::token::{Lock, NftId, Standard, TokenError, TokenRegistry};

use super::block::{Block, Vote};
use super::examination::{
    quorum, tally, Decision, ExamError, PatentSubmission, SubmissionStatus, Verdict,
    EXAMINATION_TIMEOUT_BLOCKS, TIMEOUT_COMMENT,
};
use super::tx::{Op, Transaction};
use super::validators::{AdmissionError, ValidatorSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("malformed payload: {0}")]
    Malformed(#[from] CodecError),
    #[error("payload does not match the declared {0} kind")]
    KindMismatch(&'static str),
    #[error("no identity transaction for author {0}")]
    UnknownAuthor(String),
    #[error("author signature does not verify")]
    BadSignature,
    #[error("sequence {got} from {author}, expected {expected}")]
    BadSequence { author: String, expected: u64, got: u64 },
    #[error("{0} is only allowed in the genesis block")]
    GenesisOnly(&'static str),
    #[error("authority {0} is already registered")]
    DuplicateAuthority(String),
    #[error("author {author} cannot act as {claimed}")]
    AuthorMismatch { author: String, claimed: String },
    #[error("recipient {0} has no identity")]
    UnknownRecipient(String),
    #[error(transparent)]
    Identity(#[from] AuthError),
    #[error(transparent)]
    Admission(#[from] AdmissionError),
    #[error(transparent)]
    Poe(#[from] PoeError),
    #[error(transparent)]
    Exam(#[from] ExamError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("expected height {expected}, got {got}")]
    WrongHeight { expected: u64, got: u64 },
    #[error("previous hash does not match the chain tip")]
    WrongPrevHash,
    #[error("block tick {got} does not follow the parent tick {parent}")]
    NonMonotonicTick { parent: u64, got: u64 },
    #[error("proposer {0} is not an active validator")]
    ProposerNotValidator(String),
    #[error("no validator is active at tick {0}")]
    NoValidators(u64),
    #[error("{have} valid votes, quorum is {need}")]
    InsufficientVotes { have: usize, need: usize },
    #[error("vote from {0} is not a valid validator signature")]
    InvalidVote(String),
    #[error("duplicate vote from {0}")]
    DuplicateVote(String),
    #[error("transaction {index} is invalid: {source}")]
    InvalidTransaction {
        index: usize,
        #[source]
        source: TxError,
    },
}

/// What an applied transaction did, for reports and callers that need the
/// identifiers it allocated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Receipt {
    IdentityRegistered(String),
    AuthorityRegistered(String),
    ValidatorAdmitted { validator: String, epoch: u64 },
    ExistenceRecorded { chain_id: u64, link_hash: Digest },
    Submitted { submission_id: u64 },
    VerdictRecorded { submission_id: u64, resolved: Option<SubmissionStatus>, nft: Option<NftId> },
    Finalized { submission_id: u64, status: SubmissionStatus, nft: Option<NftId> },
    ClassCreated { class_id: u64 },
    NftMinted(NftId),
    FtMinted { class_id: u64, balance: u64 },
    Transferred,
    ApprovalUpdated,
    Fractionalized { patent: NftId, shares_class_id: u64 },
    Defractionalized(NftId),
    PaymentClassSet(u64),
    Listed { listing_id: u64 },
    ListingCancelled(u64),
    AgreementOpened { agreement_id: u64 },
    Settled { agreement_id: u64 },
    RoyaltiesDistributed(RoyaltyDistribution),
    PortfolioMinted(NftId),
}

impl fmt::Display for Receipt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Receipt::IdentityRegistered(name) => write!(f, "identity {name}"),
            Receipt::AuthorityRegistered(name) => write!(f, "authority {name}"),
            Receipt::ValidatorAdmitted { validator, epoch } => write!(f, "validator {validator} epoch {epoch}"),
            Receipt::ExistenceRecorded { chain_id, link_hash } => write!(f, "poe chain {chain_id} link {link_hash}"),
            Receipt::Submitted { submission_id } => write!(f, "submission {submission_id}"),
            Receipt::VerdictRecorded { submission_id, resolved, nft } => {
                write!(f, "verdict on {submission_id}")?;
                if let Some(status) = resolved {
                    write!(f, " -> {}", status.name())?;
                }
                if let Some(nft) = nft {
                    write!(f, " nft {nft}")?;
                }
                Ok(())
            }
            Receipt::Finalized { submission_id, status, nft } => {
                write!(f, "submission {submission_id} -> {}", status.name())?;
                if let Some(nft) = nft {
                    write!(f, " nft {nft}")?;
                }
                Ok(())
            }
            Receipt::ClassCreated { class_id } => write!(f, "class {class_id}"),
            Receipt::NftMinted(id) => write!(f, "nft {id}"),
            Receipt::FtMinted { class_id, balance } => write!(f, "class {class_id} balance {balance}"),
            Receipt::Transferred => write!(f, "transferred"),
            Receipt::ApprovalUpdated => write!(f, "approval updated"),
            Receipt::Fractionalized { patent, shares_class_id } => {
                write!(f, "{patent} fractionalized into class {shares_class_id}")
            }
            Receipt::Defractionalized(id) => write!(f, "{id} defractionalized"),
            Receipt::PaymentClassSet(id) => write!(f, "payment class {id}"),
            Receipt::Listed { listing_id } => write!(f, "listing {listing_id}"),
            Receipt::ListingCancelled(id) => write!(f, "listing {id} cancelled"),
            Receipt::AgreementOpened { agreement_id } => write!(f, "agreement {agreement_id}"),
            Receipt::Settled { agreement_id } => write!(f, "agreement {agreement_id} settled"),
            Receipt::RoyaltiesDistributed(d) => {
                write!(f, "royalties for agreement {} gross {}:", d.agreement_id, d.gross)?;
                for (name, amount) in &d.payouts {
                    write!(f, " {name}={amount}")?;
                }
                Ok(())
            }
            Receipt::PortfolioMinted(id) => write!(f, "portfolio {id}"),
        }
    }
}

/// Everything the chain determines. Two replicas that applied the same blocks
/// hold equal states and equal [`LedgerState::state_hash`]es.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerState {
    blocks: u64,
    tick: u64,
    tip: Digest,
    identities: IdentityRegistry,
    authorities: BTreeMap<String, PublicKey>,
    validators: ValidatorSet,
    poe: PoeBook,
    submissions: BTreeMap<u64, PatentSubmission>,
    verdicts: BTreeMap<u64, BTreeMap<String, Verdict>>,
    tokens: TokenRegistry,
    market: MarketBook,
    patent_class: Option<u64>,
    sequences: BTreeMap<String, u64>,
}

impl Default for LedgerState {
    fn default() -> Self {
        Self::new(Standard::Algorand)
    }
}

impl LedgerState {
    pub fn new(profile: Standard) -> Self {
        Self {
            blocks: 0,
            tick: 0,
            tip: Digest::ZERO,
            identities: IdentityRegistry::new(),
            authorities: BTreeMap::new(),
            validators: ValidatorSet::default(),
            poe: PoeBook::default(),
            submissions: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            tokens: TokenRegistry::new(profile),
            market: MarketBook::default(),
            patent_class: None,
            sequences: BTreeMap::new(),
        }
    }

    pub fn state_hash(&self) -> Digest {
        sha256(&serde_json::to_vec(self).expect("state serializes"))
    }

    /// Height the next block must carry.
    pub fn next_height(&self) -> u64 {
        self.blocks
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn tip(&self) -> Digest {
        self.tip
    }

    pub fn identities(&self) -> &IdentityRegistry {
        &self.identities
    }

    pub fn authorities(&self) -> &BTreeMap<String, PublicKey> {
        &self.authorities
    }

    pub fn validators(&self) -> &ValidatorSet {
        &self.validators
    }

    pub fn poe(&self) -> &PoeBook {
        &self.poe
    }

    pub fn submission(&self, id: u64) -> Option<&PatentSubmission> {
        self.submissions.get(&id)
    }

    pub fn submissions(&self) -> impl Iterator<Item = &PatentSubmission> {
        self.submissions.values()
    }

    pub fn verdicts(&self, submission_id: u64) -> impl Iterator<Item = &Verdict> {
        self.verdicts.get(&submission_id).into_iter().flat_map(|v| v.values())
    }

    pub fn tokens(&self) -> &TokenRegistry {
        &self.tokens
    }

    pub fn market(&self) -> &MarketBook {
        &self.market
    }

    pub fn patent_class(&self) -> Option<u64> {
        self.patent_class
    }

    /// Sequence number the author's next transaction must carry.
    pub fn next_sequence(&self, author: &str) -> u64 {
        self.sequences.get(author).copied().unwrap_or(0)
    }

    pub fn status_counts(&self) -> BTreeMap<SubmissionStatus, usize> {
        let mut counts: BTreeMap<SubmissionStatus, usize> =
            SubmissionStatus::ALL.into_iter().map(|s| (s, 0)).collect();
        for submission in self.submissions.values() {
            *counts.entry(submission.status).or_default() += 1;
        }
        counts
    }

    // ---- blocks --------------------------------------------------------

    pub fn check_header(&self, block: &Block) -> Result<(), BlockError> {
        if block.height != self.blocks {
            return Err(BlockError::WrongHeight {
                expected: self.blocks,
                got: block.height,
            });
        }
        if block.prev_hash != self.tip {
            return Err(BlockError::WrongPrevHash);
        }
        if block.height > 0 {
            if block.tick <= self.tick {
                return Err(BlockError::NonMonotonicTick {
                    parent: self.tick,
                    got: block.tick,
                });
            }
            if !self.validators.is_active(&block.proposer, block.tick) {
                return Err(BlockError::ProposerNotValidator(block.proposer.clone()));
            }
        }
        Ok(())
    }

    /// Checks that a quorum of distinct validators, active at the block's
    /// tick under this (parent) state, signed the block id.
    pub fn check_votes(&self, block: &Block) -> Result<(), BlockError> {
        let active = self.validators.active_at(block.tick);
        if active.is_empty() {
            return Err(BlockError::NoValidators(block.tick));
        }
        let need = quorum(active.len());
        let message = Vote::message(block.height, &block.block_id());
        let mut seen = BTreeSet::new();
        for vote in &block.votes {
            if !seen.insert(vote.validator.as_str()) {
                return Err(BlockError::DuplicateVote(vote.validator.clone()));
            }
            let valid = active.contains(&vote.validator.as_str())
                && self
                    .identities
                    .key_of(&vote.validator)
                    .is_some_and(|key| crate::crypto::verify(&key, &message, &vote.signature));
            if !valid {
                return Err(BlockError::InvalidVote(vote.validator.clone()));
            }
        }
        if seen.len() < need {
            return Err(BlockError::InsufficientVotes { have: seen.len(), need });
        }
        Ok(())
    }

    /// Applies the block's transactions to a copy of this state without
    /// looking at votes. `store` enables the off-ledger content checks that
    /// honest validators perform before voting.
    pub fn execute(&self, block: &Block, store: Option<&ContentStore>) -> Result<(LedgerState, Vec<Receipt>), BlockError> {
        self.check_header(block)?;
        let mut next = self.clone();
        next.tick = block.tick;
        let mut receipts = Vec::with_capacity(block.txs.len());
        for (index, tx) in block.txs.iter().enumerate() {
            let receipt = next
                .apply_tx(tx, store)
                .map_err(|source| BlockError::InvalidTransaction { index, source })?;
            receipts.push(receipt);
        }
        next.blocks += 1;
        next.tip = block.block_id();
        Ok((next, receipts))
    }

    /// Validates header, votes and transactions, then commits atomically.
    pub fn apply_block(&mut self, block: &Block, store: Option<&ContentStore>) -> Result<Vec<Receipt>, BlockError> {
        self.check_header(block)?;
        if block.height > 0 {
            self.check_votes(block)?;
        }
        let (next, receipts) = self.execute(block, store)?;
        *self = next;
        Ok(receipts)
    }

    /// Whether `tx` would apply on top of this state in a block at `tick`.
    pub fn check_tx(&self, tx: &Transaction, tick: u64, store: Option<&ContentStore>) -> Result<Receipt, TxError> {
        let mut scratch = self.clone();
        scratch.tick = tick;
        scratch.apply_tx(tx, store)
    }

    /// Applies one transaction as if it were the next in a block at `tick`,
    /// leaving the state untouched on failure. Used to assemble blocks.
    pub fn stage_tx(&mut self, tx: &Transaction, tick: u64, store: Option<&ContentStore>) -> Result<Receipt, TxError> {
        let mut next = self.clone();
        next.tick = tick;
        let receipt = next.apply_tx(tx, store)?;
        *self = next;
        Ok(receipt)
    }

    // ---- transactions --------------------------------------------------

    fn apply_tx(&mut self, tx: &Transaction, store: Option<&ContentStore>) -> Result<Receipt, TxError> {
        let (sequence, op) = tx.decode_payload()?;
        if op.kind() != tx.kind {
            return Err(TxError::KindMismatch(tx.kind.name()));
        }
        let key = match &op {
            Op::RegisterIdentity { public_key } => {
                let claimed = username_of(public_key);
                if claimed != tx.author {
                    return Err(TxError::AuthorMismatch {
                        author: tx.author.clone(),
                        claimed,
                    });
                }
                *public_key
            }
            Op::RegisterAuthority { name, public_key } => {
                if *name != tx.author {
                    return Err(TxError::AuthorMismatch {
                        author: tx.author.clone(),
                        claimed: name.clone(),
                    });
                }
                *public_key
            }
            _ => self
                .identities
                .key_of(&tx.author)
                .ok_or_else(|| TxError::UnknownAuthor(tx.author.clone()))?,
        };
        if !tx.verify_signature(&key) {
            return Err(TxError::BadSignature);
        }
        let expected = self.next_sequence(&tx.author);
        if sequence != expected {
            return Err(TxError::BadSequence {
                author: tx.author.clone(),
                expected,
                got: sequence,
            });
        }
        let receipt = self.apply_op(&tx.author, op, store)?;
        self.sequences.insert(tx.author.clone(), expected + 1);
        Ok(receipt)
    }

    fn require_identity(&self, name: &str) -> Result<(), TxError> {
        if self.identities.contains(name) {
            Ok(())
        } else {
            Err(TxError::UnknownRecipient(name.to_owned()))
        }
    }

    fn apply_op(&mut self, author: &str, op: Op, store: Option<&ContentStore>) -> Result<Receipt, TxError> {
        let now = self.tick;
        let receipt = match op {
            Op::RegisterIdentity { public_key } => {
                let record = self.identities.register(public_key, now)?;
                Receipt::IdentityRegistered(record.username)
            }
            Op::RegisterAuthority { name, public_key } => {
                if self.blocks > 0 {
                    return Err(TxError::GenesisOnly("authority registration"));
                }
                if self.authorities.contains_key(&name) {
                    return Err(TxError::DuplicateAuthority(name));
                }
                self.authorities.insert(name.clone(), public_key);
                Receipt::AuthorityRegistered(name)
            }
            Op::AdmitValidator { certificate } => {
                let epoch = self
                    .validators
                    .admit_validator(&self.identities, &self.authorities, author, certificate, now)?;
                Receipt::ValidatorAdmitted {
                    validator: author.to_owned(),
                    epoch,
                }
            }
            Op::RecordExistence { chain, doc_hash } => {
                let (chain_id, record) = self.poe.record(author, doc_hash, chain, &self.identities, now)?;
                Receipt::ExistenceRecorded {
                    chain_id,
                    link_hash: record.link_hash(),
                }
            }
            Op::SubmitPatent { doc_cid, poe_chain, supersedes } => {
                self.submit_patent(author, doc_cid, poe_chain, supersedes, store)?
            }
            Op::CastVerdict { verdict } => self.cast_verdict(author, verdict)?,
            Op::FinalizeSubmission { submission_id } => self.finalize_submission(submission_id)?,
            Op::CreateClass { symbol, fungibility, metadata_cid } => Receipt::ClassCreated {
                class_id: self.tokens.create_class(author, &symbol, fungibility, metadata_cid)?,
            },
            Op::MintNft { class_id, metadata_cid } => {
                let instance = self.tokens.mint_nft(&self.identities, author, class_id, metadata_cid)?;
                Receipt::NftMinted(instance.id())
            }
            Op::MintFt { class_id, amount } => {
                let entry = self.tokens.mint_ft(&self.identities, author, class_id, amount)?;
                Receipt::FtMinted {
                    class_id,
                    balance: entry.amount,
                }
            }
            Op::Transfer { from, to, asset } => {
                self.require_identity(&to)?;
                self.tokens.transfer(&from, &to, asset, author)?;
                Receipt::Transferred
            }
            Op::BatchTransfer { from, to, assets } => {
                self.require_identity(&to)?;
                self.tokens.batch_transfer(&from, &to, &assets, author)?;
                Receipt::Transferred
            }
            Op::SetApproval { operator, scope, approved } => {
                self.require_identity(&operator)?;
                self.tokens.set_approval(author, &operator, scope, approved)?;
                Receipt::ApprovalUpdated
            }
            Op::Fractionalize { patent, shares } => {
                let record = self.tokens.fractionalize(author, patent, shares)?;
                Receipt::Fractionalized {
                    patent,
                    shares_class_id: record.shares_class_id,
                }
            }
            Op::Defractionalize { patent } => Receipt::Defractionalized(self.tokens.defractionalize(author, patent)?.id()),
            Op::SetPaymentClass { class_id } => {
                self.market.set_payment_class(&self.tokens, author, class_id)?;
                Receipt::PaymentClassSet(class_id)
            }
            Op::CreateListing { patent, mode, price } => {
                let listing = self.market.create_listing(&mut self.tokens, author, patent, mode, price)?;
                Receipt::Listed {
                    listing_id: listing.listing_id,
                }
            }
            Op::CancelListing { listing_id } => {
                self.market.cancel_listing(&mut self.tokens, author, listing_id)?;
                Receipt::ListingCancelled(listing_id)
            }
            Op::RequestLicense { listing_id, nda_hash, signature } => {
                let agreement = self
                    .market
                    .request_license(&self.identities, author, listing_id, nda_hash, signature)?;
                Receipt::AgreementOpened {
                    agreement_id: agreement.agreement_id,
                }
            }
            Op::RequestPurchase { listing_id, nda_hash, signature } => {
                let agreement = self
                    .market
                    .request_purchase(&self.identities, author, listing_id, nda_hash, signature)?;
                Receipt::AgreementOpened {
                    agreement_id: agreement.agreement_id,
                }
            }
            Op::ApproveAndSettle { agreement_id, signature } => {
                self.market
                    .approve_and_settle(&mut self.tokens, &self.identities, author, agreement_id, signature)?;
                Receipt::Settled { agreement_id }
            }
            Op::DistributeRoyalties { agreement_id } => {
                Receipt::RoyaltiesDistributed(self.market.distribute_royalties(&mut self.tokens, agreement_id)?)
            }
            Op::CompoundPortfolio { patents, metadata_cid } => {
                let portfolio = self
                    .market
                    .compound_portfolio(&mut self.tokens, author, &patents, &metadata_cid)?;
                Receipt::PortfolioMinted(portfolio.id())
            }
        };
        Ok(receipt)
    }

    // ---- examination ---------------------------------------------------

    fn submit_patent(
        &mut self,
        applicant: &str,
        doc_cid: ContentId,
        poe_chain: Option<u64>,
        supersedes: Option<u64>,
        store: Option<&ContentStore>,
    ) -> Result<Receipt, TxError> {
        if let Some(store) = store {
            if !store.contains(&doc_cid) {
                return Err(ExamError::UnresolvableContent(doc_cid).into());
            }
        }
        if let Some(chain_id) = poe_chain {
            let chain = self.poe.chain(chain_id).ok_or(PoeError::UnknownChain(chain_id))?;
            if chain.owner() != Some(applicant) {
                return Err(PoeError::NotChainOwner { chain: chain_id }.into());
            }
        }
        if let Some(old) = supersedes {
            let previous = self.submissions.get(&old).ok_or(ExamError::UnknownSubmission(old))?;
            let taken = self.submissions.values().any(|s| s.supersedes == Some(old));
            if previous.applicant != applicant || previous.status != SubmissionStatus::NeedsReformation || taken {
                return Err(ExamError::NotResubmittable(old).into());
            }
        }
        let submission_id = self.submissions.last_key_value().map_or(1, |(k, _)| k + 1);
        self.submissions.insert(
            submission_id,
            PatentSubmission {
                submission_id,
                applicant: applicant.to_owned(),
                doc_cid,
                poe_chain_ref: poe_chain,
                supersedes,
                status: SubmissionStatus::Pending,
                submitted_height: self.blocks,
                resolved_quorum: None,
                resolution_comment: None,
                nft: None,
            },
        );
        Ok(Receipt::Submitted { submission_id })
    }

    fn pending(&self, submission_id: u64) -> Result<&PatentSubmission, ExamError> {
        let submission = self
            .submissions
            .get(&submission_id)
            .ok_or(ExamError::UnknownSubmission(submission_id))?;
        if submission.status != SubmissionStatus::Pending {
            return Err(ExamError::NotPending(submission_id));
        }
        Ok(submission)
    }

    fn cast_verdict(&mut self, author: &str, verdict: Verdict) -> Result<Receipt, TxError> {
        if verdict.validator != author {
            return Err(TxError::AuthorMismatch {
                author: author.to_owned(),
                claimed: verdict.validator.clone(),
            });
        }
        if !self.validators.is_active(author, self.tick) {
            return Err(ExamError::NotAValidator(author.to_owned()).into());
        }
        let submission_id = verdict.submission_id;
        self.pending(submission_id)?;
        if self
            .verdicts
            .get(&submission_id)
            .is_some_and(|v| v.contains_key(author))
        {
            return Err(ExamError::AlreadyVoted {
                submission_id,
                validator: author.to_owned(),
            }
            .into());
        }
        if !verdict.is_consistent() {
            return Err(ExamError::InconsistentVerdict.into());
        }
        let key = self.identities.key_of(author).ok_or_else(|| TxError::UnknownAuthor(author.to_owned()))?;
        if !verdict.verify(&key) {
            return Err(ExamError::BadSignature.into());
        }
        self.verdicts
            .entry(submission_id)
            .or_default()
            .insert(author.to_owned(), verdict);
        let n = self.validators.active_at(self.tick).len();
        let resolved = tally(self.verdicts(submission_id).map(Verdict::ballot), n);
        let nft = match resolved {
            Some(status) => self.resolve(submission_id, status, quorum(n), None),
            None => None,
        };
        Ok(Receipt::VerdictRecorded {
            submission_id,
            resolved,
            nft,
        })
    }

    /// Tallies the recorded verdicts. Without a quorum the submission times
    /// out to a refusal once it has been pending for
    /// [`EXAMINATION_TIMEOUT_BLOCKS`] blocks; earlier it stays pending.
    fn finalize_submission(&mut self, submission_id: u64) -> Result<Receipt, TxError> {
        let submitted_height = self.pending(submission_id)?.submitted_height;
        let n = self.validators.active_at(self.tick).len();
        let needed = quorum(n.max(1));
        let (status, comment) = match tally(self.verdicts(submission_id).map(Verdict::ballot), n) {
            Some(status) => (status, None),
            None if self.blocks - submitted_height >= EXAMINATION_TIMEOUT_BLOCKS => {
                (SubmissionStatus::Refused, Some(TIMEOUT_COMMENT.to_owned()))
            }
            None => return Err(ExamError::QuorumNotReached { quorum: needed }.into()),
        };
        let nft = self.resolve(submission_id, status, needed, comment);
        Ok(Receipt::Finalized {
            submission_id,
            status,
            nft,
        })
    }

    fn resolve(&mut self, submission_id: u64, status: SubmissionStatus, needed: usize, comment: Option<String>) -> Option<NftId> {
        let nft = if status == SubmissionStatus::Granted {
            let class_id = *self
                .patent_class
                .get_or_insert_with(|| self.tokens.create_system_class("PATENT"));
            let submission = &self.submissions[&submission_id];
            let instance = self
                .tokens
                .issue_instance(class_id, &submission.applicant, Some(submission.doc_cid.clone()));
            Some(instance.id())
        } else {
            None
        };
        let submission = self.submissions.get_mut(&submission_id).expect("pending submission exists");
        submission.status = status;
        submission.resolved_quorum = Some(needed);
        submission.resolution_comment = comment;
        submission.nft = nft;
        nft
    }

    // ---- invariants ----------------------------------------------------

    /// Descriptions of every broken cross-module invariant.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut violations = self.tokens.check_invariants();
        for submission in self.submissions.values() {
            let id = submission.submission_id;
            match submission.status {
                SubmissionStatus::Granted => {
                    let grants: Vec<&Verdict> = self
                        .verdicts(id)
                        .filter(|v| v.decision == Decision::Grant && !v.malicious)
                        .collect();
                    let needed = submission.resolved_quorum.unwrap_or(usize::MAX);
                    if grants.len() < needed {
                        violations.push(format!("submission {id} granted with {} grant verdicts", grants.len()));
                    }
                    if grants.iter().any(|v| !v.checks.all_pass()) {
                        violations.push(format!("submission {id} granted on a failed check"));
                    }
                    match submission.nft {
                        Some(nft) if self.tokens.instance(nft).is_some() => {}
                        _ => violations.push(format!("granted submission {id} has no token")),
                    }
                }
                _ => {
                    if submission.nft.is_some() {
                        violations.push(format!("submission {id} has a token without a grant"));
                    }
                }
            }
        }
        for instance in self.tokens.instances() {
            match instance.lock {
                Some(Lock::Escrowed { listing_id }) => {
                    let held = self.market.listing(listing_id).is_some_and(|l| {
                        l.active && l.patent == instance.id() && l.seller == instance.owner
                    });
                    if !held {
                        violations.push(format!("token {} escrowed without an active listing", instance.id()));
                    }
                }
                Some(Lock::Bundled { portfolio }) => {
                    if !self.market.portfolio(portfolio).is_some_and(|m| m.contains(&instance.id())) {
                        violations.push(format!("token {} bundled outside its portfolio", instance.id()));
                    }
                }
                _ => {}
            }
        }
        for listing in self.market.listings() {
            if listing.active && listing.mode == crate::market::ListingMode::Sale {
                let escrowed = self.tokens.instance(listing.patent).is_some_and(|i| {
                    i.lock == Some(Lock::Escrowed { listing_id: listing.listing_id })
                });
                if !escrowed {
                    violations.push(format!("sale listing {} is not escrowed", listing.listing_id));
                }
            }
        }
        if let Some(payment) = self.market.payment_class() {
            let owed: u64 = self
                .market
                .agreements()
                .filter(|a| a.settled && !a.distributed)
                .map(|a| a.pooled)
                .sum();
            let pooled = self.tokens.balance(payment, ROYALTY_POOL);
            if owed != pooled {
                violations.push(format!("royalty pool holds {pooled}, undistributed revenue is {owed}"));
            }
            for d in self.market.distributions() {
                let paid: u64 = d.payouts.iter().map(|p| p.1).sum();
                if paid != d.gross {
                    violations.push(format!("distribution {} pays {paid} of {}", d.agreement_id, d.gross));
                }
            }
        }
        violations
    }
}
