//! Records three drafts of an invention as a hash chain and checks which
//! orderings of the documents the chain accepts.
//!
//!     cargo run --example proof_of_existence

use patent_ledger::crypto::KeyPair;
use patent_ledger::identity::IdentityRegistry;
use patent_ledger::poe::{record_existence, verify_chain, verify_existence, PoEChain};

fn main() {
    let mut ids = IdentityRegistry::new();
    let owner = ids.register(KeyPair::derive(3, "inventor").public_key(), 0).unwrap().username;
    let drafts: [&[u8]; 3] = [
        b"sketch: a hinge that folds twice",
        b"claims: 1. a double-folding hinge",
        b"specification with drawings",
    ];

    let mut chain = PoEChain::default();
    for (i, doc) in drafts.iter().enumerate() {
        let record = record_existence(&owner, doc, Some(&chain), &ids, 100 + i as u64).unwrap();
        println!("t={} {} prev={:?}", record.recorded_at, record.link_hash(), record.prev_link.map(|p| p.to_string()));
        chain.links.push(record);
    }

    println!("draft 2 matches its record: {}", verify_existence(&chain.links[1], drafts[1]));
    println!("draft 1 matches record 2:   {}", verify_existence(&chain.links[1], drafts[0]));
    for order in [[0, 1, 2], [1, 0, 2], [2, 1, 0]] {
        let docs = order.map(|i| drafts[i]);
        println!("order {order:?} verifies: {}", verify_chain(&chain, &docs));
    }
}
