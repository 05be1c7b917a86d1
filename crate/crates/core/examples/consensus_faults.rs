//! Sweeps validator counts and Byzantine fault counts over a few seeds.
//! Up to f faults nothing conflicts; past f, the withholding coalition
//! stops every commit.
//!
//!     cargo run --release --example consensus_faults

use patent_ledger::consensus::{run_trial, FaultModel, TrialConfig};

fn main() {
    println!("{:>3} {:>3} {:<11} {:>8} {:>9} {:>9}", "n", "byz", "model", "seeds", "commits", "conflicts");
    for n in [4usize, 7, 10] {
        let f = (n - 1) / 3;
        for (byzantine, model) in [(0, FaultModel::Mixed), (f, FaultModel::Mixed), (f + 1, FaultModel::Withholding)] {
            let mut commits = 0;
            let mut conflicts = 0;
            let seeds = 10;
            for seed in 0..seeds {
                let mut config = TrialConfig::new(n, byzantine, seed);
                config.model = model;
                let outcome = run_trial(&config);
                commits += outcome.max_new_commits();
                conflicts += outcome.conflicts.len();
            }
            println!("{n:>3} {byzantine:>3} {:<11} {seeds:>8} {commits:>9} {conflicts:>9}", format!("{model:?}"));
        }
    }
}
