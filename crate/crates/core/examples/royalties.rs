//! Splits a license fee across share holders in whole currency units.
//!
//!     cargo run --example royalties -- 999 alice=63 carol=30 dave=7

use patent_ledger::market::royalty_split;

fn main() {
    let mut args = std::env::args().skip(1);
    let gross: u64 = args.next().map_or(999, |g| g.parse().expect("gross must be an integer"));
    let mut holdings: Vec<(String, u64)> = args
        .map(|a| {
            let (name, share) = a.split_once('=').expect("holder=share");
            (name.to_owned(), share.parse().expect("share must be an integer"))
        })
        .collect();
    if holdings.is_empty() {
        holdings = vec![("alice".into(), 63), ("carol".into(), 30), ("dave".into(), 7)];
    }
    let total: u64 = holdings.iter().map(|(_, s)| s).sum();
    println!("{gross} over {total} shares");
    for ((name, paid), (_, share)) in royalty_split(gross, &holdings).iter().zip(&holdings) {
        let exact = gross as f64 * *share as f64 / total as f64;
        println!("  {name:<8} {share:>6} shares  {paid:>8}  (exact {exact:.3})");
    }
}
