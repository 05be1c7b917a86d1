//! Content-addressed storage for patent documents and token metadata.
//!
//! Objects are split into chunks of at most [`CHUNK_SIZE`] bytes. The object
//! identifier is derived from a flat hash list: the root digest is SHA-256 over
//! the concatenated chunk digests followed by the 8-byte big-endian object
//! length, rendered as `"Qm"` plus lowercase hex. Identifiers depend only on the
//! bytes, so any reader can recompute one and reject mismatching data.
//!
//! The peer-to-peer layer is modelled as a single in-process map; there is no
//! routing or block exchange.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::crypto::{sha256, Digest};

pub const CHUNK_SIZE: usize = 256 * 1024;
const PREFIX: &str = "Qm";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("no object stored under {0}")]
    NotFound(ContentId),
    #[error("stored bytes for {id} no longer hash to it")]
    IntegrityViolation { id: ContentId },
    #[error("malformed content id {0:?}")]
    MalformedContentId(String),
    #[error("corruption target chunk {chunk} offset {offset} is outside object {id}")]
    TargetOutOfRange { id: ContentId, chunk: usize, offset: usize },
}

/// `"Qm"` followed by 64 lowercase hex characters of the manifest root.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentId(String);

impl ContentId {
    pub fn from_root(root: &Digest) -> Self {
        Self(format!("{PREFIX}{}", root.to_hex()))
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let malformed = || StoreError::MalformedContentId(text.to_owned());
        let hex_part = text.strip_prefix(PREFIX).ok_or_else(malformed)?;
        let well_formed = hex_part.len() == 64
            && hex_part.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if !well_formed {
            return Err(malformed());
        }
        Ok(Self(text.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn root(&self) -> Digest {
        Digest::from_hex(&self.0[PREFIX.len()..]).expect("validated at construction")
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentId({})", self.0)
    }
}

impl FromStr for ContentId {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for ContentId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl Canonical for ContentId {
    fn encode(&self, enc: &mut Encoder) {
        enc.str(&self.0);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let text = dec.string()?;
        ContentId::parse(&text).map_err(|_| CodecError::BadLength {
            expected: PREFIX.len() + 64,
            got: text.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub bytes: Vec<u8>,
    pub hash: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectManifest {
    pub chunk_hashes: Vec<Digest>,
    pub total_len: u64,
    pub root: Digest,
}

impl ObjectManifest {
    fn from_chunks(chunks: &[Chunk]) -> Self {
        let chunk_hashes: Vec<Digest> = chunks.iter().map(|c| c.hash).collect();
        let total_len = chunks.iter().map(|c| c.bytes.len() as u64).sum();
        let root = manifest_root(&chunk_hashes, total_len);
        Self {
            chunk_hashes,
            total_len,
            root,
        }
    }
}

fn manifest_root(chunk_hashes: &[Digest], total_len: u64) -> Digest {
    let mut preimage = Vec::with_capacity(chunk_hashes.len() * 32 + 8);
    for hash in chunk_hashes {
        preimage.extend_from_slice(hash.as_bytes());
    }
    preimage.extend_from_slice(&total_len.to_be_bytes());
    sha256(&preimage)
}

/// Splits `data` into consecutive chunks of [`CHUNK_SIZE`] bytes; the last may
/// be shorter. Empty input yields one empty chunk.
pub fn chunk_object(data: &[u8]) -> Vec<Chunk> {
    if data.is_empty() {
        return vec![Chunk {
            bytes: Vec::new(),
            hash: sha256(&[]),
        }];
    }
    data.chunks(CHUNK_SIZE)
        .map(|piece| Chunk {
            bytes: piece.to_vec(),
            hash: sha256(piece),
        })
        .collect()
}

pub fn manifest_of(data: &[u8]) -> ObjectManifest {
    ObjectManifest::from_chunks(&chunk_object(data))
}

/// The identifier `put_object` would assign to `data`, without storing it.
pub fn content_id_of(data: &[u8]) -> ContentId {
    ContentId::from_root(&manifest_of(data).root)
}

/// Re-hashes `data` and compares against `id` as a requester would after a
/// retrieval.
pub fn verify_retrieval(id: &str, data: &[u8]) -> Result<bool, StoreError> {
    let id = ContentId::parse(id)?;
    Ok(content_id_of(data) == id)
}

#[derive(Debug, Clone)]
struct StoredObject {
    manifest: ObjectManifest,
    chunks: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Default)]
pub struct ContentStore {
    objects: BTreeMap<ContentId, StoredObject>,
}

impl ContentStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_object(&mut self, data: &[u8]) -> ContentId {
        let chunks = chunk_object(data);
        let manifest = ObjectManifest::from_chunks(&chunks);
        let id = ContentId::from_root(&manifest.root);
        self.objects.entry(id.clone()).or_insert_with(|| StoredObject {
            manifest,
            chunks: chunks.into_iter().map(|c| c.bytes).collect(),
        });
        id
    }

    pub fn contains(&self, id: &ContentId) -> bool {
        self.objects.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn manifest(&self, id: &ContentId) -> Option<&ObjectManifest> {
        self.objects.get(id).map(|o| &o.manifest)
    }

    /// Returns the object bytes after checking every chunk and the root
    /// against `id`.
    pub fn get_object(&self, id: &ContentId) -> Result<Vec<u8>, StoreError> {
        let object = self
            .objects
            .get(id)
            .ok_or_else(|| StoreError::NotFound(id.clone()))?;
        let violation = || StoreError::IntegrityViolation { id: id.clone() };

        let hashes: Vec<Digest> = object.chunks.iter().map(|c| sha256(c)).collect();
        if hashes != object.manifest.chunk_hashes {
            return Err(violation());
        }
        let data = object.chunks.concat();
        if manifest_root(&hashes, data.len() as u64) != id.root() {
            return Err(violation());
        }
        Ok(data)
    }

    /// Test and fault-injection hook: inverts one stored byte in place.
    pub fn corrupt(&mut self, id: &ContentId, chunk: usize, offset: usize) -> Result<(), StoreError> {
        let out_of_range = || StoreError::TargetOutOfRange {
            id: id.clone(),
            chunk,
            offset,
        };
        let object = self
            .objects
            .get_mut(id)
            .ok_or_else(|| StoreError::NotFound(id.clone()))?;
        let byte = object
            .chunks
            .get_mut(chunk)
            .and_then(|c| c.get_mut(offset))
            .ok_or_else(out_of_range)?;
        *byte ^= 0xff;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lengths(data: &[u8]) -> Vec<usize> {
        chunk_object(data).iter().map(|c| c.bytes.len()).collect()
    }

    #[test]
    fn six_hundred_kib_splits_into_three() {
        let data = vec![0xab; 600 * 1024];
        assert_eq!(lengths(&data), vec![262_144, 262_144, 88 * 1024]);
    }

    #[test]
    fn empty_input_is_one_empty_chunk() {
        assert_eq!(lengths(&[]), vec![0]);
        let manifest = manifest_of(&[]);
        assert_eq!(manifest.chunk_hashes.len(), 1);
        assert_eq!(manifest.total_len, 0);
    }

    #[test]
    fn exact_chunk_size_is_one_chunk() {
        assert_eq!(lengths(&vec![1; CHUNK_SIZE]), vec![CHUNK_SIZE]);
        assert_eq!(lengths(&vec![1; CHUNK_SIZE + 1]), vec![CHUNK_SIZE, 1]);
    }

    #[test]
    fn put_is_deterministic_and_well_formed() {
        let mut store = ContentStore::new();
        let a = store.put_object(b"x");
        let b = store.put_object(b"x");
        assert_eq!(a, b);
        assert_eq!(store.len(), 1);
        assert_eq!(a.as_str().len(), 66);
        assert!(a.as_str().starts_with("Qm"));
        assert_eq!(content_id_of(b"x"), a);
    }

    #[test]
    fn round_trip_and_not_found() {
        let mut store = ContentStore::new();
        let id = store.put_object(b"patent claims");
        assert_eq!(store.get_object(&id).unwrap(), b"patent claims");
        let missing = content_id_of(b"never stored");
        assert_eq!(store.get_object(&missing), Err(StoreError::NotFound(missing)));
    }

    #[test]
    fn corrupted_chunk_is_detected_on_get() {
        let mut store = ContentStore::new();
        let data = vec![9u8; CHUNK_SIZE + 10];
        let id = store.put_object(&data);
        store.corrupt(&id, 1, 3).unwrap();
        assert_eq!(
            store.get_object(&id),
            Err(StoreError::IntegrityViolation { id: id.clone() })
        );
        assert!(matches!(
            store.corrupt(&id, 1, 10),
            Err(StoreError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn malformed_ids_are_rejected() {
        let zs = format!("Qz{}", "0".repeat(64));
        assert!(matches!(verify_retrieval(&zs, b""), Err(StoreError::MalformedContentId(_))));
        let short = format!("Qm{}", "0".repeat(63));
        assert!(verify_retrieval(&short, b"").is_err());
        let upper = format!("Qm{}", "A".repeat(64));
        assert!(verify_retrieval(&upper, b"").is_err());
    }

    #[test]
    fn every_single_bit_flip_of_eight_bytes_fails_verification() {
        let data = *b"8 bytes!";
        let id = content_id_of(&data);
        assert!(verify_retrieval(id.as_str(), &data).unwrap());
        for bit in 0..64 {
            let mut flipped = data;
            flipped[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify_retrieval(id.as_str(), &flipped).unwrap(), "bit {bit}");
        }
    }

    #[test]
    fn length_is_bound_into_the_root() {
        // Same chunk hash list cannot arise for different lengths, but the
        // root must still differ if only the declared length changes.
        let hashes = manifest_of(b"abc").chunk_hashes;
        assert_ne!(manifest_root(&hashes, 3), manifest_root(&hashes, 4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn chunks_partition_the_input(len in 0usize..(2 * 1024 * 1024), fill in any::<u8>()) {
            let data: Vec<u8> = (0..len).map(|i| fill.wrapping_add(i as u8)).collect();
            let chunks = chunk_object(&data);
            let expected_count = if len == 0 { 1 } else { len.div_ceil(CHUNK_SIZE) };
            prop_assert_eq!(chunks.len(), expected_count);
            for c in &chunks[..chunks.len() - 1] {
                prop_assert_eq!(c.bytes.len(), CHUNK_SIZE);
            }
            let joined: Vec<u8> = chunks.iter().flat_map(|c| c.bytes.clone()).collect();
            prop_assert_eq!(joined, data);
        }

        #[test]
        fn id_format_holds(data in proptest::collection::vec(any::<u8>(), 0..512)) {
            let id = content_id_of(&data);
            prop_assert!(ContentId::parse(id.as_str()).is_ok());
        }
    }
}
