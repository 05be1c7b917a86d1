//! Stores a chunked object, flips one byte in one chunk, and shows the read
//! being refused. Then damages one block of a ledger dump and audits it.
//!
//!     cargo run --example tamper_detection

use std::path::Path;

use patent_ledger::content_store::{verify_retrieval, ContentStore, CHUNK_SIZE};
use patent_ledger::ledger::audit_dump;
use patent_ledger::scenario::{run_scenario, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let drawing: Vec<u8> = (0..(2 * CHUNK_SIZE + 1000)).map(|i| (i * 7 % 251) as u8).collect();
    let mut store = ContentStore::new();
    let id = store.put_object(&drawing);
    let manifest = store.manifest(&id).unwrap();
    println!("stored {} bytes as {id} in {} chunks", manifest.total_len, manifest.chunk_hashes.len());
    println!("clean read ok: {}", store.get_object(&id)? == drawing);

    store.corrupt(&id, 1, 12345)?;
    match store.get_object(&id) {
        Ok(_) => println!("corrupted read went unnoticed"),
        Err(e) => println!("corrupted read refused: {e}"),
    }
    let mut copy = drawing.clone();
    copy[0] ^= 1;
    println!("re-hash of altered copy matches: {}", verify_retrieval(id.as_str(), &copy)?);

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/golden_path.scn");
    let script = ScenarioScript::from_file(&path)?;
    let run = run_scenario(&script)?;
    let mut lines: Vec<String> = run.dump().lines().map(str::to_owned).collect();
    let target = 5;
    let mut bytes = hex::decode(&lines[target])?;
    let last = bytes.len() - 1;
    bytes[last] ^= 0x01;
    lines[target] = hex::encode(bytes);
    let report = audit_dump(&(lines.join("\n") + "\n"), script.profile)?;
    println!();
    print!("{report}");
    Ok(())
}
