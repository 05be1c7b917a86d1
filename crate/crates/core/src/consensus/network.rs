use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub base_latency: u64,
    /// Extra latency drawn uniformly from `0..=jitter` per message.
    pub jitter: u64,
    /// Probability that a message between two distinct nodes is lost.
    pub drop_probability: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            base_latency: 1,
            jitter: 1,
            drop_probability: 0.0,
        }
    }
}

/// A scheduled disruption of messages sent by one node (or any node).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkFault {
    /// Drops the next `count` messages sent from `start` on.
    Drop { from: Option<NodeId>, start: u64, count: u64 },
    /// Adds `extra` ticks of latency to messages sent in `start..end`.
    Delay { from: Option<NodeId>, start: u64, end: u64, extra: u64 },
}

#[derive(Debug, Clone)]
pub struct Envelope<M> {
    pub from: NodeId,
    pub to: NodeId,
    pub sent_at: u64,
    pub msg: M,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetworkStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Discrete-event message queue. Delivery order is `(delivery tick, send
/// order)`, so a run is a pure function of the seed and the calls made.
#[derive(Debug, Clone)]
pub struct SimNetwork<M> {
    config: NetworkConfig,
    rng: ChaCha8Rng,
    queue: BTreeMap<(u64, u64), Envelope<M>>,
    next_seq: u64,
    faults: Vec<LinkFault>,
    stats: NetworkStats,
}

impl<M> SimNetwork<M> {
    pub fn new(seed: u64, config: NetworkConfig) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: BTreeMap::new(),
            next_seq: 0,
            faults: Vec::new(),
            stats: NetworkStats::default(),
        }
    }

    pub fn config(&self) -> NetworkConfig {
        self.config
    }

    pub fn stats(&self) -> NetworkStats {
        self.stats
    }

    pub fn add_fault(&mut self, fault: LinkFault) {
        self.faults.push(fault);
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    fn matches(from: Option<NodeId>, sender: NodeId) -> bool {
        from.is_none_or(|f| f == sender)
    }

    /// Queues `msg`. Loopback messages are delivered in the same tick and are
    /// never lost.
    pub fn send(&mut self, from: NodeId, to: NodeId, now: u64, msg: M) {
        self.stats.sent += 1;
        let mut deliver_at = now;
        if from != to {
            for fault in &mut self.faults {
                if let LinkFault::Drop { from: f, start, count } = fault {
                    if Self::matches(*f, from) && now >= *start && *count > 0 {
                        *count -= 1;
                        self.stats.dropped += 1;
                        return;
                    }
                }
            }
            if self.config.drop_probability > 0.0 && self.rng.gen_bool(self.config.drop_probability) {
                self.stats.dropped += 1;
                return;
            }
            deliver_at += self.config.base_latency + self.rng.gen_range(0..=self.config.jitter);
            for fault in &self.faults {
                if let LinkFault::Delay { from: f, start, end, extra } = fault {
                    if Self::matches(*f, from) && (*start..*end).contains(&now) {
                        deliver_at += extra;
                    }
                }
            }
        }
        self.queue.insert(
            (deliver_at, self.next_seq),
            Envelope {
                from,
                to,
                sent_at: now,
                msg,
            },
        );
        self.next_seq += 1;
    }

    /// Removes the next message due at or before `now`.
    pub fn pop_due(&mut self, now: u64) -> Option<Envelope<M>> {
        let (&key, _) = self.queue.first_key_value()?;
        if key.0 > now {
            return None;
        }
        self.stats.delivered += 1;
        self.queue.remove(&key)
    }

    /// Draws from the network's RNG, for callers that need seeded choices.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_schedule() {
        let run = |seed| {
            let mut net = SimNetwork::new(seed, NetworkConfig { jitter: 5, ..Default::default() });
            for i in 0..20 {
                net.send(0, 1 + i % 3, 0, i);
            }
            let mut order = Vec::new();
            while let Some(e) = net.pop_due(100) {
                order.push(e.msg);
            }
            order
        };
        assert_eq!(run(7), run(7));
        assert_eq!(run(7).len(), 20);
    }

    #[test]
    fn drop_fault_consumes_its_budget() {
        let mut net = SimNetwork::new(1, NetworkConfig::default());
        net.add_fault(LinkFault::Drop { from: Some(0), start: 5, count: 2 });
        net.send(0, 1, 4, "early");
        net.send(0, 1, 5, "lost");
        net.send(1, 0, 5, "other sender");
        net.send(0, 1, 6, "lost");
        net.send(0, 1, 7, "kept");
        let mut got = Vec::new();
        while let Some(e) = net.pop_due(100) {
            got.push(e.msg);
        }
        assert_eq!(got, vec!["early", "other sender", "kept"]);
        assert_eq!(net.stats().dropped, 2);
    }

    #[test]
    fn delay_fault_and_loopback() {
        let mut net = SimNetwork::new(1, NetworkConfig { jitter: 0, ..Default::default() });
        net.add_fault(LinkFault::Delay { from: None, start: 0, end: 10, extra: 5 });
        net.send(0, 1, 0, "slow");
        net.send(0, 0, 0, "self");
        assert_eq!(net.pop_due(0).map(|e| e.msg), Some("self"));
        assert!(net.pop_due(5).is_none());
        assert_eq!(net.pop_due(6).map(|e| e.msg), Some("slow"));
    }
}
