//! Hashing and signature primitives.
//!
//! SHA-256 is the only digest used anywhere in the ledger. Signatures are
//! Ed25519 (deterministic), with keys derived from 32-byte seeds so that
//! simulations are reproducible.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::codec::{Canonical, CodecError, Decoder, Encoder};

macro_rules! hex_newtype {
    ($name:ident, $len:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(text: &str) -> Option<Self> {
                let raw = hex::decode(text).ok()?;
                Some(Self(raw.try_into().ok()?))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl Canonical for $name {
            fn encode(&self, enc: &mut Encoder) {
                enc.bytes(&self.0);
            }

            fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
                Ok(Self(dec.fixed::<$len>()?))
            }
        }
    };
}

hex_newtype!(Digest, 32);
hex_newtype!(PublicKey, 32);
hex_newtype!(Signature, 64);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);
}

pub fn sha256(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn sha256_parts(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest(hasher.finalize().into())
}

/// An Ed25519 signing identity. The secret half never leaves this type.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    /// Deterministic key for a named actor under a simulation seed.
    pub fn derive(seed: u64, label: &str) -> Self {
        let digest = sha256_parts(&[b"patent-ledger/key/v1", &seed.to_be_bytes(), label.as_bytes()]);
        Self::from_seed(digest.0)
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &self.public_key())
            .finish_non_exhaustive()
    }
}

/// Strict Ed25519 verification; malformed keys simply fail.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(&public_key.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify_strict(message, &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn derived_keys_are_stable_and_distinct() {
        assert_eq!(KeyPair::derive(1, "alice").public_key(), KeyPair::derive(1, "alice").public_key());
        assert_ne!(KeyPair::derive(1, "alice").public_key(), KeyPair::derive(2, "alice").public_key());
        assert_ne!(KeyPair::derive(1, "alice").public_key(), KeyPair::derive(1, "bob").public_key());
    }

    #[test]
    fn debug_does_not_leak_secret() {
        let kp = KeyPair::from_seed([7; 32]);
        let shown = format!("{kp:?}");
        assert!(!shown.contains(&hex::encode([7u8; 32])));
    }

    proptest! {
        #[test]
        fn sign_verify_round_trip(seed in any::<[u8; 32]>(), msg in proptest::collection::vec(any::<u8>(), 0..256)) {
            let kp = KeyPair::from_seed(seed);
            let sig = kp.sign(&msg);
            prop_assert!(verify(&kp.public_key(), &msg, &sig));
            let mut other = msg.clone();
            other.push(0);
            prop_assert!(!verify(&kp.public_key(), &other, &sig));
        }
    }
}
