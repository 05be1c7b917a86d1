//! Ledger identities and the challenge-response login between a user and a
//! service provider.
//!
//! A user's identity is its public key; the username is a textual rendering of
//! that key. Login runs in six steps:
//!
//! 1. the user loads its key pair,
//! 2. sends a login request (its username) to a provider,
//! 3. the provider resolves the username against the identity registry,
//! 4. the provider answers with an [`AuthRequest`] carrying a fresh logical
//!    timestamp, the username and the provider's signature,
//! 5. the user signs the five-field [`LoginCredential`],
//! 6. the provider checks the credential and its freshness and remembers it
//!    so it cannot be presented twice.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::codec::Encoder;
use crate::crypto::{sha256, verify, Digest, KeyPair, PublicKey, Signature};

/// Freshness window, in ticks, used when a caller has no better value.
pub const DEFAULT_FRESHNESS_WINDOW: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("public key is already registered as {0}")]
    DuplicateIdentity(String),
    #[error("no identity transaction for {0}")]
    UnknownIdentity(String),
    #[error("authentication request signature does not verify under the provider key")]
    InvalidProviderSignature,
}

/// Why a provider refused a credential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LoginRejection {
    #[error("user is not registered")]
    UnknownUser,
    #[error("provider is not registered")]
    UnknownProvider,
    #[error("credential is addressed to a different provider")]
    WrongProvider,
    #[error("embedded key does not match the registered identity")]
    KeyMismatch,
    #[error("user signature does not verify")]
    BadSignature,
    #[error("credential timestamp lies in the future")]
    FutureTimestamp,
    #[error("credential is older than the freshness window")]
    Stale,
    #[error("credential was already accepted")]
    Replayed,
}

pub fn username_of(public_key: &PublicKey) -> String {
    format!("u{}", public_key.to_hex())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityRecord {
    pub username: String,
    pub public_key: PublicKey,
    pub registered_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IdentityRegistry {
    records: BTreeMap<String, IdentityRecord>,
}

impl IdentityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, public_key: PublicKey, tick: u64) -> Result<IdentityRecord, AuthError> {
        let username = username_of(&public_key);
        if self.records.contains_key(&username) {
            return Err(AuthError::DuplicateIdentity(username));
        }
        let record = IdentityRecord {
            username: username.clone(),
            public_key,
            registered_at: tick,
        };
        self.records.insert(username, record.clone());
        Ok(record)
    }

    pub fn get(&self, username: &str) -> Option<&IdentityRecord> {
        self.records.get(username)
    }

    pub fn contains(&self, username: &str) -> bool {
        self.records.contains_key(username)
    }

    pub fn key_of(&self, username: &str) -> Option<PublicKey> {
        self.records.get(username).map(|r| r.public_key)
    }

    pub fn require(&self, username: &str) -> Result<&IdentityRecord, AuthError> {
        self.get(username)
            .ok_or_else(|| AuthError::UnknownIdentity(username.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthRequest {
    pub timestamp: u64,
    pub username: String,
    pub provider_signature: Signature,
}

impl AuthRequest {
    pub fn signed_message(timestamp: u64, username: &str) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64(timestamp).str(username);
        enc.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginCredential {
    pub timestamp: u64,
    pub user_name: String,
    pub user_pk: PublicKey,
    pub provider_name: String,
    pub provider_pk: PublicKey,
    pub user_signature: Signature,
}

impl LoginCredential {
    /// Canonical encoding of the five signed fields.
    pub fn signed_message(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64(self.timestamp)
            .str(&self.user_name)
            .bytes(self.user_pk.as_bytes())
            .str(&self.provider_name)
            .bytes(self.provider_pk.as_bytes());
        enc.finish()
    }

    fn nonce(&self) -> Digest {
        sha256(&self.signed_message())
    }
}

/// Step 5: check the provider's request and sign the login credential.
pub fn answer_challenge(
    key_pair: &KeyPair,
    request: &AuthRequest,
    provider: &IdentityRecord,
) -> Result<LoginCredential, AuthError> {
    let message = AuthRequest::signed_message(request.timestamp, &request.username);
    if !verify(&provider.public_key, &message, &request.provider_signature) {
        return Err(AuthError::InvalidProviderSignature);
    }
    let user_pk = key_pair.public_key();
    let mut credential = LoginCredential {
        timestamp: request.timestamp,
        user_name: username_of(&user_pk),
        user_pk,
        provider_name: provider.username.clone(),
        provider_pk: provider.public_key,
        user_signature: Signature([0; 64]),
    };
    credential.user_signature = key_pair.sign(&credential.signed_message());
    Ok(credential)
}

/// A service provider's side of the login protocol. The provider is itself a
/// registered identity; its accepted-credential set is the replay guard.
#[derive(Debug)]
pub struct ServiceProvider {
    key_pair: KeyPair,
    name: String,
    accepted: BTreeSet<Digest>,
}

impl ServiceProvider {
    pub fn new(key_pair: KeyPair) -> Self {
        let name = username_of(&key_pair.public_key());
        Self {
            key_pair,
            name,
            accepted: BTreeSet::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Steps 2-4: resolve the user on the ledger and issue a signed request
    /// stamped with `now`.
    pub fn initiate_login(
        &self,
        username: &str,
        registry: &IdentityRegistry,
        now: u64,
    ) -> Result<AuthRequest, AuthError> {
        registry.require(username)?;
        let message = AuthRequest::signed_message(now, username);
        Ok(AuthRequest {
            timestamp: now,
            username: username.to_owned(),
            provider_signature: self.key_pair.sign(&message),
        })
    }

    /// Step 6. On success the credential is remembered and any later
    /// presentation is rejected as a replay.
    pub fn verify_login(
        &mut self,
        credential: &LoginCredential,
        registry: &IdentityRegistry,
        now: u64,
        window: u64,
    ) -> Result<(), LoginRejection> {
        let user = registry
            .get(&credential.user_name)
            .ok_or(LoginRejection::UnknownUser)?;
        let provider = registry
            .get(&credential.provider_name)
            .ok_or(LoginRejection::UnknownProvider)?;
        if credential.provider_name != self.name {
            return Err(LoginRejection::WrongProvider);
        }
        if user.public_key != credential.user_pk || provider.public_key != credential.provider_pk {
            return Err(LoginRejection::KeyMismatch);
        }
        if !verify(&credential.user_pk, &credential.signed_message(), &credential.user_signature) {
            return Err(LoginRejection::BadSignature);
        }
        let age = now
            .checked_sub(credential.timestamp)
            .ok_or(LoginRejection::FutureTimestamp)?;
        if age > window {
            return Err(LoginRejection::Stale);
        }
        if !self.accepted.insert(credential.nonce()) {
            return Err(LoginRejection::Replayed);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        registry: IdentityRegistry,
        user: KeyPair,
        provider: ServiceProvider,
    }

    fn fixture() -> Fixture {
        let user = KeyPair::derive(1, "alice");
        let provider_key = KeyPair::derive(1, "portal");
        let mut registry = IdentityRegistry::new();
        registry.register(user.public_key(), 0).unwrap();
        registry.register(provider_key.public_key(), 0).unwrap();
        Fixture {
            registry,
            user,
            provider: ServiceProvider::new(provider_key),
        }
    }

    fn login_at(f: &Fixture, tick: u64) -> LoginCredential {
        let username = username_of(&f.user.public_key());
        let request = f.provider.initiate_login(&username, &f.registry, tick).unwrap();
        let provider_record = f.registry.get(f.provider.name()).unwrap();
        answer_challenge(&f.user, &request, provider_record).unwrap()
    }

    #[test]
    fn username_is_derived_from_key() {
        let mut registry = IdentityRegistry::new();
        let kp = KeyPair::derive(3, "x");
        let record = registry.register(kp.public_key(), 4).unwrap();
        assert_eq!(record.username, format!("u{}", kp.public_key().to_hex()));
        assert_eq!(record.registered_at, 4);
        assert_eq!(
            registry.register(kp.public_key(), 5),
            Err(AuthError::DuplicateIdentity(record.username))
        );
    }

    #[test]
    fn thousand_keys_give_thousand_usernames() {
        let mut registry = IdentityRegistry::new();
        for i in 0..1000 {
            registry.register(KeyPair::derive(99, &i.to_string()).public_key(), 0).unwrap();
        }
        assert_eq!(registry.len(), 1000);
    }

    #[test]
    fn honest_flow_succeeds() {
        let mut f = fixture();
        let credential = login_at(&f, 20);
        assert_eq!(f.provider.verify_login(&credential, &f.registry, 25, 10), Ok(()));
    }

    #[test]
    fn unknown_user_cannot_start_login() {
        let f = fixture();
        assert!(matches!(
            f.provider.initiate_login("u00", &f.registry, 1),
            Err(AuthError::UnknownIdentity(_))
        ));
    }

    #[test]
    fn timestamps_follow_the_clock() {
        let f = fixture();
        let name = username_of(&f.user.public_key());
        let a = f.provider.initiate_login(&name, &f.registry, 3).unwrap();
        let b = f.provider.initiate_login(&name, &f.registry, 4).unwrap();
        assert!(a.timestamp < b.timestamp);
    }

    #[test]
    fn forged_provider_signature_is_refused() {
        let f = fixture();
        let name = username_of(&f.user.public_key());
        let mut request = f.provider.initiate_login(&name, &f.registry, 1).unwrap();
        request.provider_signature.0[0] ^= 1;
        let provider_record = f.registry.get(f.provider.name()).unwrap();
        assert_eq!(
            answer_challenge(&f.user, &request, provider_record),
            Err(AuthError::InvalidProviderSignature)
        );
    }

    #[test]
    fn replay_is_rejected() {
        let mut f = fixture();
        let credential = login_at(&f, 1);
        assert!(f.provider.verify_login(&credential, &f.registry, 2, 10).is_ok());
        assert_eq!(
            f.provider.verify_login(&credential, &f.registry, 3, 10),
            Err(LoginRejection::Replayed)
        );
    }

    #[test]
    fn window_boundary_is_inclusive() {
        let mut f = fixture();
        let old = login_at(&f, 0);
        assert_eq!(f.provider.verify_login(&old, &f.registry, 11, 10), Err(LoginRejection::Stale));
        let edge = login_at(&f, 1);
        assert_eq!(f.provider.verify_login(&edge, &f.registry, 11, 10), Ok(()));
        let future = login_at(&f, 30);
        assert_eq!(
            f.provider.verify_login(&future, &f.registry, 29, 10),
            Err(LoginRejection::FutureTimestamp)
        );
    }

    #[test]
    fn each_field_mutation_is_rejected() {
        let f = fixture();
        let other = KeyPair::derive(1, "mallory").public_key();
        let base = login_at(&f, 5);
        let mutants: Vec<LoginCredential> = vec![
            LoginCredential { timestamp: base.timestamp + 1, ..base.clone() },
            LoginCredential { user_name: username_of(&other), ..base.clone() },
            LoginCredential { user_pk: other, ..base.clone() },
            LoginCredential { provider_name: username_of(&other), ..base.clone() },
            LoginCredential { provider_pk: other, ..base.clone() },
        ];
        for (i, mutant) in mutants.iter().enumerate() {
            let mut provider = ServiceProvider::new(KeyPair::derive(1, "portal"));
            assert!(
                provider.verify_login(mutant, &f.registry, 6, 10).is_err(),
                "mutant {i} accepted"
            );
        }
    }

    #[test]
    fn credential_for_another_provider_is_refused() {
        let mut f = fixture();
        let other_key = KeyPair::derive(1, "other-portal");
        f.registry.register(other_key.public_key(), 0).unwrap();
        let credential = login_at(&f, 1);
        let mut other = ServiceProvider::new(other_key);
        assert_eq!(
            other.verify_login(&credential, &f.registry, 2, 10),
            Err(LoginRejection::WrongProvider)
        );
    }
}
