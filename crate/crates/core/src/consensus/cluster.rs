use std::collections::BTreeMap;

use crate::content_store::ContentStore;
use crate::crypto::{Digest, KeyPair};
use crate::identity::username_of;
use crate::ledger::{Block, BlockError, Ledger, Transaction};
use crate::token::Standard;

use super::network::{NetworkConfig, NodeId, SimNetwork};
use super::node::{Behavior, Context, Message, Node, Outgoing};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub seed: u64,
    pub ticks_per_round: u64,
    pub network: NetworkConfig,
}

impl ClusterConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ticks_per_round: 6,
            network: NetworkConfig::default(),
        }
    }

    /// Ticks a node waits in one view before rotating the proposer.
    pub fn view_timeout(&self) -> u64 {
        3 * self.ticks_per_round
    }
}

/// A set of validator replicas on a simulated network, sharing one
/// off-ledger content store.
#[derive(Debug, Clone)]
pub struct Cluster {
    config: ClusterConfig,
    net: SimNetwork<Message>,
    nodes: Vec<Node>,
    names: Vec<String>,
    store: ContentStore,
    now: u64,
}

impl Cluster {
    /// Starts one node per key from the same genesis block.
    pub fn new(genesis: &Block, keys: Vec<KeyPair>, profile: Standard, config: ClusterConfig) -> Result<Self, BlockError> {
        let mut base = Ledger::new(profile);
        base.append(genesis.clone(), None)?;
        let mut cluster = Self {
            config,
            net: SimNetwork::new(config.seed, config.network),
            nodes: Vec::new(),
            names: Vec::new(),
            store: ContentStore::new(),
            now: genesis.tick + 1,
        };
        for key in keys {
            cluster.push_node(key, Behavior::Honest, base.clone());
        }
        Ok(cluster)
    }

    fn push_node(&mut self, key: KeyPair, behavior: Behavior, ledger: Ledger) -> NodeId {
        let id = self.nodes.len();
        self.names.push(username_of(&key.public_key()));
        self.nodes.push(Node::new(id, key, behavior, ledger));
        id
    }

    /// Adds a replica that starts from the longest honest chain.
    pub fn add_node(&mut self, key: KeyPair, behavior: Behavior) -> NodeId {
        let ledger = self
            .honest()
            .max_by_key(|n| n.height())
            .map(|n| n.ledger().clone())
            .expect("cluster has an honest node");
        self.push_node(key, behavior, ledger)
    }

    pub fn config(&self) -> ClusterConfig {
        self.config
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn set_behavior(&mut self, id: NodeId, behavior: Behavior) {
        self.nodes[id].set_behavior(behavior);
    }

    pub fn honest(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| !n.behavior().is_byzantine())
    }

    pub fn network(&self) -> &SimNetwork<Message> {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut SimNetwork<Message> {
        &mut self.net
    }

    pub fn store(&self) -> &ContentStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ContentStore {
        &mut self.store
    }

    /// Hands a client transaction to every replica's mempool.
    pub fn submit(&mut self, tx: &Transaction) {
        for node in &mut self.nodes {
            node.submit(tx.clone());
        }
    }

    fn dispatch(&mut self, from: NodeId, outgoing: Vec<Outgoing>) {
        for out in outgoing {
            match out {
                Outgoing::Broadcast(msg) => {
                    for to in 0..self.nodes.len() {
                        self.net.send(from, to, self.now, msg.clone());
                    }
                }
                Outgoing::To(to, msg) => self.net.send(from, to, self.now, msg),
            }
        }
    }

    fn deliver_due(&mut self) {
        while let Some(envelope) = self.net.pop_due(self.now) {
            let ctx = Context {
                now: self.now,
                names: &self.names,
                store: &self.store,
                view_timeout: self.config.view_timeout(),
            };
            let Some(node) = self.nodes.get_mut(envelope.to) else {
                continue;
            };
            let out = node.on_message(envelope.from, envelope.msg, &ctx);
            self.dispatch(envelope.to, out);
        }
    }

    /// Delivers everything due, fires every node's timers, delivers the
    /// loopback traffic that produced, and advances the clock by one tick.
    pub fn step(&mut self) {
        self.deliver_due();
        for id in 0..self.nodes.len() {
            let ctx = Context {
                now: self.now,
                names: &self.names,
                store: &self.store,
                view_timeout: self.config.view_timeout(),
            };
            let out = self.nodes[id].on_tick(&ctx);
            self.dispatch(id, out);
        }
        self.deliver_due();
        self.now += 1;
    }

    pub fn run_for(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.step();
        }
    }

    /// Steps until `done` holds or `max_ticks` elapse; reports whether it held.
    pub fn run_until(&mut self, max_ticks: u64, mut done: impl FnMut(&Cluster) -> bool) -> bool {
        for _ in 0..max_ticks {
            if done(self) {
                return true;
            }
            self.step();
        }
        done(self)
    }

    pub fn min_honest_height(&self) -> u64 {
        self.honest().map(Node::height).min().unwrap_or(0)
    }

    pub fn max_honest_height(&self) -> u64 {
        self.honest().map(Node::height).max().unwrap_or(0)
    }

    /// Heights at which two honest replicas committed different blocks.
    pub fn conflicts(&self) -> Vec<String> {
        let mut by_height: BTreeMap<u64, BTreeMap<Digest, Vec<&str>>> = BTreeMap::new();
        for node in self.honest() {
            for block in node.ledger().blocks() {
                by_height
                    .entry(block.height)
                    .or_default()
                    .entry(block.block_id())
                    .or_default()
                    .push(node.name());
            }
        }
        by_height
            .into_iter()
            .filter(|(_, ids)| ids.len() > 1)
            .map(|(height, ids)| format!("height {height}: {} different blocks committed", ids.len()))
            .collect()
    }

    /// A replica with the longest honest chain.
    pub fn reference(&self) -> &Node {
        self.honest()
            .max_by_key(|n| n.height())
            .unwrap_or(&self.nodes[0])
    }
}
