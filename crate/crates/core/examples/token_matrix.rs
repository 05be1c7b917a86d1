//! Prints the token standard conformance table, then shows a profile
//! refusing an operation it does not support.
//!
//!     cargo run --example token_matrix

use patent_ledger::crypto::KeyPair;
use patent_ledger::identity::IdentityRegistry;
use patent_ledger::token::{render_matrix, Feature, Fungibility, Standard, TokenRegistry};

fn main() {
    print!("{}", render_matrix());
    println!();

    let mut ids = IdentityRegistry::new();
    let owner = ids.register(KeyPair::derive(1, "owner").public_key(), 0).unwrap().username;
    for standard in [Standard::Erc721, Standard::Algorand] {
        let mut reg = TokenRegistry::new(standard);
        let class = reg.create_class(&owner, "PAT", Fungibility::NonFungible, None).unwrap();
        let nft = reg.mint_nft(&ids, &owner, class, None).unwrap().id();
        let fractional = standard.supports(Feature::Fractionalization);
        match reg.fractionalize(&owner, nft, 100) {
            Ok(record) => println!("{standard}: {nft} split into 100 shares of class {}", record.shares_class_id),
            Err(e) => println!("{standard}: {e} (table says {fractional})"),
        }
    }
}
