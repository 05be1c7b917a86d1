//! Runs the bundled golden-path script: a patent goes from sign-up through
//! examination to a license sale and a royalty payout.
//!
//!     cargo run --example golden_path

use std::path::Path;

use patent_ledger::ledger::SubmissionStatus;
use patent_ledger::scenario::{run_scenario, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/golden_path.scn");
    let script = ScenarioScript::from_file(&path)?;
    let run = run_scenario(&script)?;
    print!("{}", run.report);

    let state = run.ledger.state();
    for submission in state.submissions() {
        if submission.status != SubmissionStatus::Granted {
            continue;
        }
        let nft = submission.nft.expect("granted patents carry an NFT");
        let cid = state.tokens().instance(nft).and_then(|i| i.metadata_cid.clone()).expect("metadata");
        let doc = run.store.get_object(&cid)?;
        println!("patent {nft} -> {cid}");
        println!("  {}", String::from_utf8_lossy(&doc));
    }
    for d in state.market().distributions() {
        println!("royalties on {} USD:", d.gross);
        for (holder, amount) in &d.payouts {
            println!("  {holder:>12.12}  {amount}");
        }
    }
    Ok(())
}
