//! Certificate-gated validator membership.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::certs::{check_certificate, CertRejection, Certificate};
use crate::crypto::PublicKey;
use crate::identity::IdentityRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdmissionError {
    #[error("no identity transaction for {0}")]
    UnknownIdentity(String),
    #[error("certificate does not verify: {0}")]
    InvalidCertificate(String),
    #[error("certificate has expired")]
    ExpiredCertificate,
    #[error("certificate subject key does not match the candidate's registered key")]
    KeyMismatch,
    #[error("certificate is issued to {0}")]
    SubjectMismatch(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidatorSet {
    members: BTreeMap<String, Certificate>,
    epoch: u64,
}

impl ValidatorSet {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn certificate(&self, username: &str) -> Option<&Certificate> {
        self.members.get(username)
    }

    pub fn all(&self) -> impl Iterator<Item = (&str, &Certificate)> {
        self.members.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Members whose certificate covers `tick`, in username order.
    pub fn active_at(&self, tick: u64) -> Vec<&str> {
        self.members
            .iter()
            .filter(|(_, cert)| cert.is_valid_at(tick))
            .map(|(name, _)| name.as_str())
            .collect()
    }

    pub fn is_active(&self, username: &str, tick: u64) -> bool {
        self.members.get(username).is_some_and(|c| c.is_valid_at(tick))
    }

    /// Admits `candidate` until its certificate expires; a renewal replaces
    /// the previous certificate. Every admission starts a new epoch.
    pub fn admit_validator(
        &mut self,
        identities: &IdentityRegistry,
        authorities: &BTreeMap<String, PublicKey>,
        candidate: &str,
        cert: Certificate,
        now: u64,
    ) -> Result<u64, AdmissionError> {
        let candidate_key = identities
            .key_of(candidate)
            .ok_or_else(|| AdmissionError::UnknownIdentity(candidate.to_owned()))?;
        let ca_pk = authorities.get(&cert.issuer_name).ok_or_else(|| {
            AdmissionError::InvalidCertificate(format!("unknown authority {}", cert.issuer_name))
        })?;
        match check_certificate(&cert, ca_pk, now) {
            Ok(()) => {}
            Err(CertRejection::Expired) => return Err(AdmissionError::ExpiredCertificate),
            Err(other) => return Err(AdmissionError::InvalidCertificate(other.to_string())),
        }
        if cert.subject_name != candidate {
            return Err(AdmissionError::SubjectMismatch(cert.subject_name));
        }
        if cert.subject_public_key_info != candidate_key {
            return Err(AdmissionError::KeyMismatch);
        }
        self.members.insert(candidate.to_owned(), cert);
        self.epoch += 1;
        Ok(self.epoch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certs::CertificateAuthority;
    use crate::crypto::KeyPair;

    fn setup() -> (IdentityRegistry, BTreeMap<String, PublicKey>, CertificateAuthority, KeyPair, String) {
        let mut ids = IdentityRegistry::new();
        let kp = KeyPair::derive(4, "examiner");
        let name = ids.register(kp.public_key(), 0).unwrap().username;
        let ca = CertificateAuthority::new("office", KeyPair::derive(4, "office"));
        let mut authorities = BTreeMap::new();
        authorities.insert("office".to_owned(), ca.public_key());
        (ids, authorities, ca, kp, name)
    }

    #[test]
    fn valid_certificate_admits() {
        let (ids, auth, mut ca, kp, name) = setup();
        let cert = ca.issue_certificate(&name, kp.public_key(), 0, 100).unwrap();
        let mut set = ValidatorSet::default();
        assert_eq!(set.admit_validator(&ids, &auth, &name, cert, 5), Ok(1));
        assert_eq!(set.active_at(5), vec![name.as_str()]);
        assert!(set.active_at(101).is_empty());
    }

    #[test]
    fn expired_certificate() {
        let (ids, auth, mut ca, kp, name) = setup();
        let cert = ca.issue_certificate(&name, kp.public_key(), 0, 4).unwrap();
        let mut set = ValidatorSet::default();
        assert_eq!(
            set.admit_validator(&ids, &auth, &name, cert, 5),
            Err(AdmissionError::ExpiredCertificate)
        );
        assert_eq!(set.epoch(), 0);
    }

    #[test]
    fn certificate_for_another_key() {
        let (ids, auth, mut ca, _, name) = setup();
        let other = KeyPair::derive(4, "someone-else").public_key();
        let cert = ca.issue_certificate(&name, other, 0, 100).unwrap();
        let mut set = ValidatorSet::default();
        assert_eq!(set.admit_validator(&ids, &auth, &name, cert, 5), Err(AdmissionError::KeyMismatch));
    }

    #[test]
    fn forged_or_unknown_issuer() {
        let (ids, auth, _, kp, name) = setup();
        let mut rogue = CertificateAuthority::new("office", KeyPair::derive(4, "rogue"));
        let cert = rogue.issue_certificate(&name, kp.public_key(), 0, 100).unwrap();
        let mut set = ValidatorSet::default();
        assert!(matches!(
            set.admit_validator(&ids, &auth, &name, cert, 5),
            Err(AdmissionError::InvalidCertificate(_))
        ));
        let mut unknown = CertificateAuthority::new("elsewhere", KeyPair::derive(4, "elsewhere"));
        let cert = unknown.issue_certificate(&name, kp.public_key(), 0, 100).unwrap();
        assert!(matches!(
            set.admit_validator(&ids, &auth, &name, cert, 5),
            Err(AdmissionError::InvalidCertificate(_))
        ));
    }
}
