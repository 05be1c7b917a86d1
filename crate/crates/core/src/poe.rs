//! Proof-of-existence records and staged development chains.
//!
//! Only SHA-256 digests of documents reach the ledger. A chain couples each
//! stage to the hash of the whole previous record, so ownership and recording
//! time are bound along with the document digests.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::crypto::{sha256, Digest};
use crate::identity::IdentityRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoeError {
    #[error("no identity transaction for {0}")]
    UnknownIdentity(String),
    #[error("chain {chain} belongs to another owner")]
    NotChainOwner { chain: u64 },
    #[error("unknown proof-of-existence chain {0}")]
    UnknownChain(u64),
    #[error("stage recorded at {now} does not follow the chain tail recorded at {previous}")]
    NonMonotonicTime { previous: u64, now: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoERecord {
    pub doc_hash: Digest,
    pub prev_link: Option<Digest>,
    pub recorded_at: u64,
    pub owner: String,
}

impl PoERecord {
    pub fn link_hash(&self) -> Digest {
        sha256(&self.to_canonical_bytes())
    }
}

impl Canonical for PoERecord {
    fn encode(&self, enc: &mut Encoder) {
        enc.value(&self.doc_hash)
            .option(self.prev_link.as_ref(), |e, d| {
                e.value(d);
            })
            .u64(self.recorded_at)
            .str(&self.owner);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            doc_hash: dec.value()?,
            prev_link: dec.option(|d| d.value())?,
            recorded_at: dec.u64()?,
            owner: dec.string()?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PoEChain {
    pub links: Vec<PoERecord>,
}

impl PoEChain {
    pub fn owner(&self) -> Option<&str> {
        self.links.first().map(|r| r.owner.as_str())
    }

    pub fn tail(&self) -> Option<&PoERecord> {
        self.links.last()
    }
}

/// Builds the next record for `owner` from an already computed digest.
pub fn next_record(
    owner: &str,
    doc_hash: Digest,
    chain: Option<&PoEChain>,
    identities: &IdentityRegistry,
    now: u64,
) -> Result<PoERecord, PoeError> {
    if !identities.contains(owner) {
        return Err(PoeError::UnknownIdentity(owner.to_owned()));
    }
    let tail = chain.and_then(PoEChain::tail);
    if let Some(tail) = tail {
        if tail.owner != owner {
            return Err(PoeError::NotChainOwner { chain: 0 });
        }
        if now <= tail.recorded_at {
            return Err(PoeError::NonMonotonicTime {
                previous: tail.recorded_at,
                now,
            });
        }
    }
    Ok(PoERecord {
        doc_hash,
        prev_link: tail.map(PoERecord::link_hash),
        recorded_at: now,
        owner: owner.to_owned(),
    })
}

/// Hashes `document` and links it to the tail of `chain`, if any.
pub fn record_existence(
    owner: &str,
    document: &[u8],
    chain: Option<&PoEChain>,
    identities: &IdentityRegistry,
    now: u64,
) -> Result<PoERecord, PoeError> {
    next_record(owner, sha256(document), chain, identities, now)
}

pub fn verify_existence(record: &PoERecord, document: &[u8]) -> bool {
    sha256(document) == record.doc_hash
}

pub fn verify_chain(chain: &PoEChain, documents: &[&[u8]]) -> bool {
    if chain.links.len() != documents.len() {
        return false;
    }
    let mut expected_prev = None;
    for (record, document) in chain.links.iter().zip(documents) {
        if record.prev_link != expected_prev || !verify_existence(record, document) {
            return false;
        }
        expected_prev = Some(record.link_hash());
    }
    true
}

/// All chains recorded on the ledger, keyed by dense ids starting at 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PoeBook {
    chains: BTreeMap<u64, PoEChain>,
}

impl PoeBook {
    pub fn chain(&self, id: u64) -> Option<&PoEChain> {
        self.chains.get(&id)
    }

    pub fn chains(&self) -> impl Iterator<Item = (u64, &PoEChain)> {
        self.chains.iter().map(|(id, c)| (*id, c))
    }

    /// Records `doc_hash` as a new chain (`chain == None`) or as the next
    /// stage of an existing one. Returns the chain id and the record.
    pub fn record(
        &mut self,
        owner: &str,
        doc_hash: Digest,
        chain: Option<u64>,
        identities: &IdentityRegistry,
        now: u64,
    ) -> Result<(u64, PoERecord), PoeError> {
        let existing = match chain {
            Some(id) => Some(self.chains.get(&id).ok_or(PoeError::UnknownChain(id))?),
            None => None,
        };
        let record = next_record(owner, doc_hash, existing, identities, now).map_err(|e| match e {
            PoeError::NotChainOwner { .. } => PoeError::NotChainOwner {
                chain: chain.unwrap_or_default(),
            },
            other => other,
        })?;
        let id = chain.unwrap_or_else(|| self.chains.last_key_value().map_or(1, |(k, _)| k + 1));
        self.chains.entry(id).or_default().links.push(record.clone());
        Ok((id, record))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyPair;
    use crate::identity::username_of;

    fn setup() -> (IdentityRegistry, String) {
        let mut ids = IdentityRegistry::new();
        let rec = ids.register(KeyPair::derive(5, "inventor").public_key(), 0).unwrap();
        (ids, rec.username)
    }

    fn three_stage() -> (PoEChain, [&'static [u8]; 3]) {
        let (ids, owner) = setup();
        let docs: [&[u8]; 3] = [b"sketch", b"prototype", b"claims"];
        let mut chain = PoEChain::default();
        for (i, doc) in docs.iter().enumerate() {
            let rec = record_existence(&owner, doc, Some(&chain), &ids, i as u64 + 1).unwrap();
            chain.links.push(rec);
        }
        (chain, docs)
    }

    #[test]
    fn first_stage_has_no_link() {
        let (ids, owner) = setup();
        let rec = record_existence(&owner, b"d", None, &ids, 1).unwrap();
        assert_eq!(rec.prev_link, None);
        assert_eq!(rec.doc_hash, sha256(b"d"));
    }

    #[test]
    fn second_stage_links_first() {
        let (chain, _) = three_stage();
        assert_eq!(chain.links[1].prev_link, Some(chain.links[0].link_hash()));
    }

    #[test]
    fn unregistered_owner_is_refused() {
        let (ids, _) = setup();
        let stranger = username_of(&KeyPair::derive(5, "stranger").public_key());
        assert_eq!(
            record_existence(&stranger, b"d", None, &ids, 1),
            Err(PoeError::UnknownIdentity(stranger))
        );
    }

    #[test]
    fn existence_checks() {
        let (ids, owner) = setup();
        let rec = record_existence(&owner, b"d", None, &ids, 1).unwrap();
        assert!(verify_existence(&rec, b"d"));
        assert!(!verify_existence(&rec, b"e"));
        let empty = record_existence(&owner, b"", None, &ids, 1).unwrap();
        assert!(verify_existence(&empty, b""));
    }

    #[test]
    fn chain_verification() {
        let (chain, docs) = three_stage();
        assert!(verify_chain(&chain, &docs));
        assert!(!verify_chain(&chain, &[docs[0], docs[2], docs[1]]));
        assert!(!verify_chain(&chain, &docs[..2]));
        let mut broken = chain.clone();
        broken.links[1].prev_link = Some(Digest::ZERO);
        assert!(!verify_chain(&broken, &docs));
    }

    #[test]
    fn book_enforces_owner_and_time() {
        let (mut ids, owner) = setup();
        let other = ids.register(KeyPair::derive(5, "other").public_key(), 0).unwrap().username;
        let mut book = PoeBook::default();
        let (id, _) = book.record(&owner, sha256(b"a"), None, &ids, 3).unwrap();
        assert_eq!(id, 1);
        assert_eq!(
            book.record(&other, sha256(b"b"), Some(id), &ids, 4),
            Err(PoeError::NotChainOwner { chain: 1 })
        );
        assert_eq!(
            book.record(&owner, sha256(b"b"), Some(id), &ids, 3),
            Err(PoeError::NonMonotonicTime { previous: 3, now: 3 })
        );
        assert_eq!(book.record(&owner, sha256(b"b"), Some(9), &ids, 5), Err(PoeError::UnknownChain(9)));
        let (same, rec) = book.record(&owner, sha256(b"b"), Some(id), &ids, 4).unwrap();
        assert_eq!(same, 1);
        assert_eq!(rec.prev_link, Some(book.chain(1).unwrap().links[0].link_hash()));
        let (second, _) = book.record(&other, sha256(b"c"), None, &ids, 4).unwrap();
        assert_eq!(second, 2);
    }
}
