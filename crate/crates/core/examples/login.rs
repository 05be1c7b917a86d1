//! Challenge-response login against a service provider, a replay attempt,
//! and a validator certificate checked against its authority.
//!
//!     cargo run --example login

use patent_ledger::certs::{check_certificate, CertificateAuthority};
use patent_ledger::crypto::KeyPair;
use patent_ledger::identity::{answer_challenge, IdentityRegistry, ServiceProvider, DEFAULT_FRESHNESS_WINDOW};

fn main() {
    let mut registry = IdentityRegistry::new();
    let alice = KeyPair::derive(5, "alice");
    let portal_key = KeyPair::derive(5, "portal");
    let alice_name = registry.register(alice.public_key(), 0).unwrap().username;
    let portal_record = registry.register(portal_key.public_key(), 0).unwrap();
    let mut portal = ServiceProvider::new(portal_key);

    let request = portal.initiate_login(&alice_name, &registry, 1000).unwrap();
    let credential = answer_challenge(&alice, &request, &portal_record).unwrap();
    println!("{alice_name:.12} signs in at t=1003: {:?}", portal.verify_login(&credential, &registry, 1003, DEFAULT_FRESHNESS_WINDOW));
    println!("same credential again:      {:?}", portal.verify_login(&credential, &registry, 1004, DEFAULT_FRESHNESS_WINDOW));

    let late = portal.initiate_login(&alice_name, &registry, 2000).unwrap();
    let credential = answer_challenge(&alice, &late, &portal_record).unwrap();
    println!("answered 30 ticks late:     {:?}", portal.verify_login(&credential, &registry, 2030, DEFAULT_FRESHNESS_WINDOW));

    let mut office = CertificateAuthority::new("office", KeyPair::derive(5, "office"));
    let validator = KeyPair::derive(5, "v1");
    let cert = office.issue_certificate("v1", validator.public_key(), 0, 500).unwrap();
    println!();
    println!("certificate {} for {} valid {}..={}", cert.serial_number, cert.subject_name, cert.validity_not_before, cert.validity_not_after);
    for now in [10, 600] {
        println!("  at t={now}: {:?}", check_certificate(&cert, &office.public_key(), now));
    }
    let mut forged = cert.clone();
    forged.subject_name = "mallory".into();
    println!("  renamed:  {:?}", check_certificate(&forged, &office.public_key(), 10));
}
