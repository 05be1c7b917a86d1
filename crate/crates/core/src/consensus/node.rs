use std::collections::BTreeMap;

use crate::content_store::ContentStore;
use crate::crypto::{sha256_parts, verify, Digest, KeyPair};
use crate::identity::username_of;
use crate::ledger::{quorum, Block, Ledger, Op, Transaction, Vote};

use super::network::NodeId;

/// How a simulated validator behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    Honest,
    /// Crashed: sends nothing and ignores everything.
    Silent,
    /// Sends conflicting proposals to disjoint halves of its peers when it
    /// leads, and signs votes only for fabricated block ids.
    Equivocate,
    /// Equivocates as leader and signs a valid vote for every proposal it
    /// sees, conflicting ones included.
    DoubleVote,
}

impl Behavior {
    pub fn is_byzantine(self) -> bool {
        self != Behavior::Honest
    }
}

#[derive(Debug, Clone)]
pub enum Message {
    Proposal { view: u64, block: Block },
    Vote { height: u64, block_id: Digest, vote: Vote },
    Commit { block: Block },
    Status { height: u64 },
    SyncRequest { from_height: u64 },
    SyncResponse { blocks: Vec<Block> },
}

#[derive(Debug, Clone)]
pub enum Outgoing {
    Broadcast(Message),
    To(NodeId, Message),
}

/// What a node may consult besides its own state.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub now: u64,
    pub names: &'a [String],
    pub store: &'a ContentStore,
    pub view_timeout: u64,
}

const MAX_SYNC_BLOCKS: usize = 64;
/// Ticks a node keeps collecting votes after reaching quorum, so that a fully
/// honest round certifies with every vote.
const VOTE_GRACE_TICKS: u64 = 1;
const MAX_BUFFERED: usize = 4096;

#[derive(Debug, Clone, Default)]
struct Round {
    view: u64,
    view_started: u64,
    proposed_view: Option<u64>,
    proposals: BTreeMap<Digest, Block>,
    lock: Option<Digest>,
    my_vote: Option<Message>,
    votes: BTreeMap<Digest, BTreeMap<String, Vote>>,
    quorum_since: BTreeMap<Digest, u64>,
}

impl Round {
    fn starting(now: u64) -> Self {
        Self {
            view_started: now,
            ..Self::default()
        }
    }
}

/// One validator replica. Handling is sequential; all interaction with other
/// nodes goes through returned [`Outgoing`] messages.
#[derive(Debug, Clone)]
pub struct Node {
    id: NodeId,
    name: String,
    key: KeyPair,
    behavior: Behavior,
    ledger: Ledger,
    mempool: Vec<Transaction>,
    round: Round,
    future: Vec<(NodeId, Message)>,
}

impl Node {
    pub fn new(id: NodeId, key: KeyPair, behavior: Behavior, ledger: Ledger) -> Self {
        let name = username_of(&key.public_key());
        Self {
            id,
            name,
            key,
            behavior,
            ledger,
            mempool: Vec::new(),
            round: Round::default(),
            future: Vec::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn behavior(&self) -> Behavior {
        self.behavior
    }

    pub fn set_behavior(&mut self, behavior: Behavior) {
        self.behavior = behavior;
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn height(&self) -> u64 {
        self.ledger.height()
    }

    pub fn view(&self) -> u64 {
        self.round.view
    }

    pub fn mempool(&self) -> &[Transaction] {
        &self.mempool
    }

    pub fn submit(&mut self, tx: Transaction) {
        if !self.mempool.contains(&tx) {
            self.mempool.push(tx);
        }
    }

    fn is_active(&self, now: u64) -> bool {
        self.ledger.state().validators().is_active(&self.name, now)
    }

    /// Round-robin over the validators active at `now`, in username order.
    pub fn leader(&self, height: u64, view: u64, now: u64) -> Option<String> {
        let active = self.ledger.state().validators().active_at(now);
        if active.is_empty() {
            return None;
        }
        Some(active[((height + view) % active.len() as u64) as usize].to_owned())
    }

    fn outstanding(&self) -> bool {
        !self.mempool.is_empty() || self.round.lock.is_some() || !self.round.proposals.is_empty()
    }

    // ---- timers --------------------------------------------------------

    pub fn on_tick(&mut self, ctx: &Context<'_>) -> Vec<Outgoing> {
        let mut out = Vec::new();
        if self.behavior == Behavior::Silent || !self.is_active(ctx.now) {
            return out;
        }
        let waiting: Vec<Digest> = self.round.quorum_since.keys().copied().collect();
        for id in waiting {
            out.extend(self.try_commit(id, ctx));
        }
        let height = self.height();
        let view = self.round.view;
        if self.round.proposed_view != Some(view) && self.leader(height, view, ctx.now).as_deref() == Some(self.name.as_str()) {
            match self.behavior {
                Behavior::Honest => {
                    if let Some(block) = self.make_proposal(ctx) {
                        self.round.proposed_view = Some(view);
                        out.push(Outgoing::Broadcast(Message::Proposal { view, block }));
                    }
                }
                _ => {
                    self.round.proposed_view = Some(view);
                    out.extend(self.equivocate(ctx));
                }
            }
        }
        if self.outstanding() && ctx.now >= self.round.view_started + ctx.view_timeout {
            self.round.view += 1;
            self.round.view_started = ctx.now;
            if self.behavior == Behavior::Honest {
                out.push(Outgoing::Broadcast(Message::Status { height }));
                if let Some(vote) = &self.round.my_vote {
                    out.push(Outgoing::Broadcast(vote.clone()));
                }
            }
        }
        out
    }

    fn fresh_block(&mut self, ctx: &Context<'_>) -> Option<Block> {
        let state = self.ledger.state();
        if ctx.now <= state.tick() {
            return None;
        }
        let mut scratch = state.clone();
        let mut txs = Vec::new();
        self.mempool.retain(|tx| match scratch.stage_tx(tx, ctx.now, Some(ctx.store)) {
            Ok(_) => {
                txs.push(tx.clone());
                true
            }
            Err(_) => false,
        });
        Some(Block {
            height: state.next_height(),
            prev_hash: state.tip(),
            tick: ctx.now,
            proposer: self.name.clone(),
            txs,
            votes: Vec::new(),
        })
    }

    fn make_proposal(&mut self, ctx: &Context<'_>) -> Option<Block> {
        if let Some(locked) = self.round.lock {
            return self.round.proposals.get(&locked).cloned();
        }
        self.fresh_block(ctx).filter(|b| !b.txs.is_empty())
    }

    /// Two valid blocks for the same height: the pending transactions, and
    /// the same plus a throwaway identity registration.
    fn equivocate(&mut self, ctx: &Context<'_>) -> Vec<Outgoing> {
        let Some(first) = self.fresh_block(ctx) else {
            return Vec::new();
        };
        let mut second = first.clone();
        let sybil = KeyPair::derive(first.height ^ (self.round.view << 32), &format!("sybil/{}", self.name));
        let public_key = sybil.public_key();
        second.txs.push(Transaction::new(
            &sybil,
            &username_of(&public_key),
            0,
            &Op::RegisterIdentity { public_key },
        ));
        let view = self.round.view;
        let peers: Vec<NodeId> = (0..ctx.names.len()).filter(|p| *p != self.id).collect();
        let half = peers.len() / 2;
        peers
            .iter()
            .enumerate()
            .map(|(i, peer)| {
                let block = if i < half { first.clone() } else { second.clone() };
                Outgoing::To(*peer, Message::Proposal { view, block })
            })
            .collect()
    }

    // ---- messages ------------------------------------------------------

    pub fn on_message(&mut self, from: NodeId, msg: Message, ctx: &Context<'_>) -> Vec<Outgoing> {
        match self.behavior {
            Behavior::Silent => Vec::new(),
            Behavior::Honest => self.handle_honest(from, msg, ctx),
            Behavior::Equivocate | Behavior::DoubleVote => self.handle_byzantine(from, msg, ctx),
        }
    }

    fn buffer(&mut self, from: NodeId, msg: Message) {
        if self.future.len() < MAX_BUFFERED {
            self.future.push((from, msg));
        }
    }

    fn handle_honest(&mut self, from: NodeId, msg: Message, ctx: &Context<'_>) -> Vec<Outgoing> {
        let height = self.height();
        let mut out = Vec::new();
        match msg {
            Message::Proposal { view, block } => {
                if block.height > height {
                    self.buffer(from, Message::Proposal { view, block });
                    out.push(Outgoing::To(from, Message::SyncRequest { from_height: height }));
                } else if block.height == height {
                    out.extend(self.on_proposal(from, view, block, ctx));
                }
            }
            Message::Vote { height: h, block_id, vote } => {
                if h > height {
                    self.buffer(from, Message::Vote { height: h, block_id, vote });
                } else if h == height {
                    out.extend(self.on_vote(block_id, vote, ctx));
                }
            }
            Message::Commit { block } => {
                if block.height > height {
                    self.buffer(from, Message::Commit { block });
                    out.push(Outgoing::To(from, Message::SyncRequest { from_height: height }));
                } else if block.height == height && self.ledger.append(block, None).is_ok() {
                    out.extend(self.after_commit(ctx));
                }
            }
            Message::Status { height: theirs } => {
                if theirs < height {
                    out.push(Outgoing::To(from, self.sync_response(theirs)));
                } else if theirs > height {
                    out.push(Outgoing::To(from, Message::SyncRequest { from_height: height }));
                }
            }
            Message::SyncRequest { from_height } => {
                if from_height < height {
                    out.push(Outgoing::To(from, self.sync_response(from_height)));
                }
            }
            Message::SyncResponse { blocks } => out.extend(self.on_sync(blocks, ctx)),
        }
        out
    }

    fn handle_byzantine(&mut self, from: NodeId, msg: Message, ctx: &Context<'_>) -> Vec<Outgoing> {
        let height = self.height();
        match msg {
            Message::Proposal { block, .. } if block.height == height => {
                let real = block.block_id();
                let target = if self.behavior == Behavior::DoubleVote {
                    real
                } else {
                    sha256_parts(&[real.as_bytes(), self.name.as_bytes()])
                };
                let vote = Vote::cast(&self.key, &self.name, height, &target);
                vec![Outgoing::Broadcast(Message::Vote {
                    height,
                    block_id: target,
                    vote,
                })]
            }
            Message::Commit { block } if block.height == height => {
                if self.ledger.append(block, None).is_ok() {
                    self.after_commit(ctx)
                } else {
                    Vec::new()
                }
            }
            Message::Commit { block } if block.height > height => {
                vec![Outgoing::To(from, Message::SyncRequest { from_height: height })]
            }
            Message::SyncResponse { blocks } => self.on_sync(blocks, ctx),
            _ => Vec::new(),
        }
    }

    fn on_proposal(&mut self, from: NodeId, view: u64, block: Block, ctx: &Context<'_>) -> Vec<Outgoing> {
        let Some(sender) = ctx.names.get(from) else {
            return Vec::new();
        };
        if self.leader(block.height, view, ctx.now).as_ref() != Some(sender) || block.tick > ctx.now {
            return Vec::new();
        }
        if view > self.round.view {
            self.round.view = view;
            self.round.view_started = ctx.now;
        }
        let id = block.block_id();
        if !self.round.proposals.contains_key(&id) {
            if self.ledger.state().execute(&block, Some(ctx.store)).is_err() {
                return Vec::new();
            }
            self.round.proposals.insert(id, block);
        }
        let mut out = Vec::new();
        if !self.is_active(ctx.now) {
            return out;
        }
        match self.round.lock {
            None => {
                self.round.lock = Some(id);
                let height = self.height();
                let vote = Message::Vote {
                    height,
                    block_id: id,
                    vote: Vote::cast(&self.key, &self.name, height, &id),
                };
                self.round.my_vote = Some(vote.clone());
                out.push(Outgoing::Broadcast(vote));
            }
            Some(locked) if locked == id => {
                if let Some(vote) = &self.round.my_vote {
                    out.push(Outgoing::Broadcast(vote.clone()));
                }
            }
            Some(_) => {}
        }
        out.extend(self.try_commit(id, ctx));
        out
    }

    fn on_vote(&mut self, block_id: Digest, vote: Vote, ctx: &Context<'_>) -> Vec<Outgoing> {
        let state = self.ledger.state();
        let Some(key) = state.identities().key_of(&vote.validator) else {
            return Vec::new();
        };
        if state.validators().certificate(&vote.validator).is_none()
            || !verify(&key, &Vote::message(self.height(), &block_id), &vote.signature)
        {
            return Vec::new();
        }
        self.round
            .votes
            .entry(block_id)
            .or_default()
            .insert(vote.validator.clone(), vote);
        self.try_commit(block_id, ctx)
    }

    fn try_commit(&mut self, id: Digest, ctx: &Context<'_>) -> Vec<Outgoing> {
        let Some(proposal) = self.round.proposals.get(&id) else {
            return Vec::new();
        };
        let validators = self.ledger.state().validators();
        let active = validators.active_at(proposal.tick);
        let votes: Vec<Vote> = self
            .round
            .votes
            .get(&id)
            .map(|v| {
                v.values()
                    .filter(|vote| active.contains(&vote.validator.as_str()))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default();
        if active.is_empty() || votes.len() < quorum(active.len()) {
            return Vec::new();
        }
        if votes.len() < active.len() {
            let since = *self.round.quorum_since.entry(id).or_insert(ctx.now);
            if ctx.now < since + VOTE_GRACE_TICKS {
                return Vec::new();
            }
        }
        let mut block = proposal.clone();
        block.votes = votes;
        if self.ledger.append(block.clone(), None).is_err() {
            return Vec::new();
        }
        let mut out = vec![Outgoing::Broadcast(Message::Commit { block })];
        out.extend(self.after_commit(ctx));
        out
    }

    fn sync_response(&self, from_height: u64) -> Message {
        let blocks = self.ledger.blocks()[from_height as usize..]
            .iter()
            .take(MAX_SYNC_BLOCKS)
            .cloned()
            .collect();
        Message::SyncResponse { blocks }
    }

    fn on_sync(&mut self, blocks: Vec<Block>, ctx: &Context<'_>) -> Vec<Outgoing> {
        let mut advanced = false;
        for block in blocks {
            if block.height < self.height() {
                continue;
            }
            if block.height > self.height() || self.ledger.append(block, None).is_err() {
                break;
            }
            advanced = true;
        }
        if advanced {
            self.after_commit(ctx)
        } else {
            Vec::new()
        }
    }

    /// Clears the round, drops transactions whose sequence number is used up
    /// and replays buffered messages that may now be current.
    fn after_commit(&mut self, ctx: &Context<'_>) -> Vec<Outgoing> {
        let state = self.ledger.state();
        self.mempool.retain(|tx| {
            tx.decode_payload()
                .is_ok_and(|(seq, _)| seq >= state.next_sequence(&tx.author))
        });
        self.round = Round::starting(ctx.now);
        let height = self.height();
        let buffered = std::mem::take(&mut self.future);
        let mut out = Vec::new();
        for (from, msg) in buffered {
            let msg_height = match &msg {
                Message::Proposal { block, .. } | Message::Commit { block } => block.height,
                Message::Vote { height, .. } => *height,
                _ => continue,
            };
            if msg_height > height {
                self.buffer(from, msg);
            } else if msg_height == height {
                out.extend(self.on_message(from, msg, ctx));
            }
        }
        out
    }
}
