//! X.509-style examiner certificates issued by patent offices.
//!
//! Only the field layout is kept: version, serial number, signature algorithm
//! identifier, issuer name, validity period, subject name and subject public
//! key. Fields are encoded canonically and signed by the issuing authority.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::crypto::{verify, KeyPair, PublicKey, Signature};

pub const CERT_VERSION: u64 = 3;
pub const SIGNATURE_ALGORITHM: &str = "ed25519-sha256-lite";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("validity period [{not_before}, {not_after}] is empty")]
    EmptyValidity { not_before: u64, not_after: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CertRejection {
    #[error("certificate signature does not verify under the authority key")]
    BadSignature,
    #[error("certificate is not valid yet")]
    NotYetValid,
    #[error("certificate has expired")]
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub version: u64,
    pub serial_number: u64,
    pub signature_algorithm_identifier: String,
    pub issuer_name: String,
    pub validity_not_before: u64,
    pub validity_not_after: u64,
    pub subject_name: String,
    pub subject_public_key_info: PublicKey,
    pub ca_signature: Signature,
}

impl Certificate {
    /// The signed part: every field except the authority signature.
    pub fn content_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_content(&mut enc);
        enc.finish()
    }

    fn encode_content(&self, enc: &mut Encoder) {
        enc.u64(self.version)
            .u64(self.serial_number)
            .str(&self.signature_algorithm_identifier)
            .str(&self.issuer_name)
            .u64(self.validity_not_before)
            .u64(self.validity_not_after)
            .str(&self.subject_name)
            .bytes(self.subject_public_key_info.as_bytes());
    }

    pub fn is_valid_at(&self, now: u64) -> bool {
        self.validity_not_before <= now && now <= self.validity_not_after
    }
}

impl Canonical for Certificate {
    fn encode(&self, enc: &mut Encoder) {
        self.encode_content(enc);
        enc.bytes(self.ca_signature.as_bytes());
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            version: dec.u64()?,
            serial_number: dec.u64()?,
            signature_algorithm_identifier: dec.string()?,
            issuer_name: dec.string()?,
            validity_not_before: dec.u64()?,
            validity_not_after: dec.u64()?,
            subject_name: dec.string()?,
            subject_public_key_info: PublicKey(dec.fixed()?),
            ca_signature: Signature(dec.fixed()?),
        })
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Version: {}", self.version)?;
        writeln!(f, "Serial Number: {}", self.serial_number)?;
        writeln!(f, "Signature Algorithm: {}", self.signature_algorithm_identifier)?;
        writeln!(f, "Issuer: {}", self.issuer_name)?;
        writeln!(
            f,
            "Validity: {} .. {}",
            self.validity_not_before, self.validity_not_after
        )?;
        writeln!(f, "Subject: {}", self.subject_name)?;
        writeln!(f, "Subject Public Key: {}", self.subject_public_key_info)?;
        write!(f, "Signature: {}", self.ca_signature)
    }
}

/// A patent office acting as certificate authority.
#[derive(Debug, Clone)]
pub struct CertificateAuthority {
    name: String,
    key_pair: KeyPair,
    issued_serials: BTreeSet<u64>,
}

impl CertificateAuthority {
    pub fn new(name: impl Into<String>, key_pair: KeyPair) -> Self {
        Self {
            name: name.into(),
            key_pair,
            issued_serials: BTreeSet::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn public_key(&self) -> PublicKey {
        self.key_pair.public_key()
    }

    pub fn issued_serials(&self) -> &BTreeSet<u64> {
        &self.issued_serials
    }

    /// Issues a certificate valid over the inclusive tick range
    /// `[not_before, not_after]`. Serials start at 1 and increase by one.
    pub fn issue_certificate(
        &mut self,
        subject_name: &str,
        subject_pk: PublicKey,
        not_before: u64,
        not_after: u64,
    ) -> Result<Certificate, CertError> {
        if not_before > not_after {
            return Err(CertError::EmptyValidity { not_before, not_after });
        }
        let serial_number = self.issued_serials.last().map_or(1, |s| s + 1);
        let mut cert = Certificate {
            version: CERT_VERSION,
            serial_number,
            signature_algorithm_identifier: SIGNATURE_ALGORITHM.to_owned(),
            issuer_name: self.name.clone(),
            validity_not_before: not_before,
            validity_not_after: not_after,
            subject_name: subject_name.to_owned(),
            subject_public_key_info: subject_pk,
            ca_signature: Signature([0; 64]),
        };
        cert.ca_signature = self.key_pair.sign(&cert.content_bytes());
        self.issued_serials.insert(serial_number);
        Ok(cert)
    }
}

/// Signature first, then the validity window.
pub fn check_certificate(cert: &Certificate, ca_pk: &PublicKey, now: u64) -> Result<(), CertRejection> {
    if !verify(ca_pk, &cert.content_bytes(), &cert.ca_signature) {
        return Err(CertRejection::BadSignature);
    }
    if now < cert.validity_not_before {
        return Err(CertRejection::NotYetValid);
    }
    if now > cert.validity_not_after {
        return Err(CertRejection::Expired);
    }
    Ok(())
}

pub fn verify_certificate(cert: &Certificate, ca_pk: &PublicKey, now: u64) -> bool {
    check_certificate(cert, ca_pk, now).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn office() -> CertificateAuthority {
        CertificateAuthority::new("office", KeyPair::derive(0, "office"))
    }

    #[test]
    fn serials_start_at_one_and_increase() {
        let mut ca = office();
        let pk = KeyPair::derive(0, "v").public_key();
        let first = ca.issue_certificate("v", pk, 0, 10).unwrap();
        let second = ca.issue_certificate("v", pk, 0, 10).unwrap();
        assert_eq!((first.serial_number, second.serial_number), (1, 2));
        assert!(verify_certificate(&first, &ca.public_key(), 5));
        assert!(verify_certificate(&second, &ca.public_key(), 5));
        assert_eq!(first.version, 3);
    }

    #[test]
    fn empty_validity_is_refused() {
        let mut ca = office();
        let pk = KeyPair::derive(0, "v").public_key();
        assert_eq!(
            ca.issue_certificate("v", pk, 5, 4),
            Err(CertError::EmptyValidity { not_before: 5, not_after: 4 })
        );
        assert!(ca.issued_serials().is_empty());
    }

    #[test]
    fn expiry_is_strict() {
        let mut ca = office();
        let cert = ca
            .issue_certificate("v", KeyPair::derive(0, "v").public_key(), 2, 8)
            .unwrap();
        assert!(verify_certificate(&cert, &ca.public_key(), 8));
        assert_eq!(check_certificate(&cert, &ca.public_key(), 9), Err(CertRejection::Expired));
        assert_eq!(check_certificate(&cert, &ca.public_key(), 1), Err(CertRejection::NotYetValid));
    }

    #[test]
    fn other_authority_cannot_vouch() {
        let mut ca = office();
        let other = CertificateAuthority::new("rival", KeyPair::derive(0, "rival"));
        let cert = ca
            .issue_certificate("v", KeyPair::derive(0, "v").public_key(), 0, 8)
            .unwrap();
        assert_eq!(
            check_certificate(&cert, &other.public_key(), 1),
            Err(CertRejection::BadSignature)
        );
    }

    #[test]
    fn canonical_form_round_trips() {
        let mut ca = office();
        let cert = ca
            .issue_certificate("v", KeyPair::derive(0, "v").public_key(), 0, 8)
            .unwrap();
        let bytes = cert.to_canonical_bytes();
        assert_eq!(Certificate::from_canonical_bytes(&bytes).unwrap(), cert);
        assert!(cert.to_string().contains("Serial Number: 1"));
    }
}
