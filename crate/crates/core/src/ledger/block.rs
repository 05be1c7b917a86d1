use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::crypto::{sha256, Digest, KeyPair, Signature};

use super::tx::Transaction;

/// A validator's endorsement of one block id at one height.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote {
    pub validator: String,
    pub signature: Signature,
}

impl Vote {
    pub fn message(height: u64, block_id: &Digest) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.str("vote").u64(height).value(block_id);
        enc.finish()
    }

    pub fn cast(key_pair: &KeyPair, validator: &str, height: u64, block_id: &Digest) -> Self {
        Self {
            validator: validator.to_owned(),
            signature: key_pair.sign(&Self::message(height, block_id)),
        }
    }
}

impl Canonical for Vote {
    fn encode(&self, enc: &mut Encoder) {
        enc.str(&self.validator).value(&self.signature);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            validator: dec.string()?,
            signature: dec.value()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    /// Simulation time at which the block was proposed.
    pub tick: u64,
    pub proposer: String,
    pub txs: Vec<Transaction>,
    pub votes: Vec<Vote>,
}

impl Block {
    pub fn genesis(tick: u64, txs: Vec<Transaction>) -> Self {
        Self {
            height: 0,
            prev_hash: Digest::ZERO,
            tick,
            proposer: String::new(),
            txs,
            votes: Vec::new(),
        }
    }

    fn encode_header(&self, enc: &mut Encoder) {
        enc.u64(self.height)
            .value(&self.prev_hash)
            .u64(self.tick)
            .str(&self.proposer)
            .list(&self.txs);
    }

    /// Hash of everything except the votes. Votes sign this id and the next
    /// block links to it.
    pub fn block_id(&self) -> Digest {
        let mut enc = Encoder::new();
        self.encode_header(&mut enc);
        sha256(&enc.finish())
    }
}

impl Canonical for Block {
    fn encode(&self, enc: &mut Encoder) {
        self.encode_header(enc);
        enc.list(&self.votes);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            height: dec.u64()?,
            prev_hash: dec.value()?,
            tick: dec.u64()?,
            proposer: dec.string()?,
            txs: dec.list()?,
            votes: dec.list()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::tx::Op;

    #[test]
    fn id_ignores_votes_but_covers_transactions() {
        let kp = KeyPair::derive(2, "v");
        let tx = Transaction::new(&kp, "v", 0, &Op::MintFt { class_id: 1, amount: 3 });
        let mut block = Block {
            height: 1,
            prev_hash: sha256(b"parent"),
            tick: 4,
            proposer: "v".into(),
            txs: vec![tx],
            votes: Vec::new(),
        };
        let id = block.block_id();
        block.votes.push(Vote::cast(&kp, "v", 1, &id));
        assert_eq!(block.block_id(), id);
        let back = Block::from_canonical_bytes(&block.to_canonical_bytes()).unwrap();
        assert_eq!(back, block);
        block.txs[0].payload[0] ^= 1;
        assert_ne!(block.block_id(), id);
    }
}
