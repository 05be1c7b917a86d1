//! Runs any scenario script, then rebuilds the ledger from its dump alone
//! and compares state hashes.
//!
//!     cargo run --example replay_audit -- scenarios/market_sale_portfolio.scn

use std::path::PathBuf;

use patent_ledger::ledger::{audit_dump, replay_dump};
use patent_ledger::scenario::{run_scenario, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/examination_outcomes.scn"));
    let script = ScenarioScript::from_file(&path)?;
    let run = run_scenario(&script)?;
    let dump = run.dump();
    println!("{}: {} blocks, {} bytes of dump", path.display(), dump.lines().count(), dump.len());

    let replayed = replay_dump(&dump, script.profile)?;
    println!("live hash     {}", run.report.final_state_hash);
    println!("replayed hash {}", replayed.state().state_hash());
    print!("{}", audit_dump(&dump, script.profile)?);
    Ok(())
}
