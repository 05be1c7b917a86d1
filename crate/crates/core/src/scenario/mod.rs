//! Scripted end-to-end runs over a simulated validator cluster.
//!
//! A script is plain text, one step per line: `<actor> <command> [args]`.
//! Steps before the `start` line form the genesis block; each later ledger
//! step is signed by its actor, sent to every replica and awaited until it
//! commits. A leading `!` marks a step that must be rejected. Named objects
//! (documents, chains, submissions, classes, NFTs, listings, agreements) are
//! bound by the step that creates them and referenced by name afterwards; a
//! submission name also stands for the patent it was granted.
//!
//! | command | effect |
//! |---|---|
//! | `authority` | registers the actor as a certificate authority (genesis only) |
//! | `identity` | registers the actor's key |
//! | `validator <ca>` | admits the actor with a certificate from `<ca>` |
//! | `upload <doc> <text..>`, `upload-random <doc> <bytes>`, `upload-file <doc> <path>` | stores a document off-ledger |
//! | `fetch <doc>` | retrieves and re-hashes a document |
//! | `read <patent>` | retrieves a patent's document if the actor has access |
//! | `login <provider>` | six-step login, then a replay attempt |
//! | `poe <chain> <doc>` | records the document on a named existence chain |
//! | `submit <sub> <doc> [poe <chain>] [supersedes <sub>]` | files a patent |
//! | `verdict <sub> grant\|reform\|refuse\|malicious [fail:<check>..] [comment..]` | casts a verdict; checks are `formal`, `prior-art`, `substantive` |
//! | `finalize <sub>` | closes an examination |
//! | `class <name> <SYMBOL> fungible\|nft\|semi [meta <doc>]` | creates a token class |
//! | `mint-nft <name> <class> [meta <doc>]`, `mint-ft <class> <amount>` | mints |
//! | `transfer <to> <asset> [from <owner>]`, `batch <to> <asset>.. [from <owner>]` | moves assets (`<class>:<amount>` or an NFT) |
//! | `approve <operator> <class\|all> [revoke]` | sets an operator approval |
//! | `fractionalize <patent> <shares> <name>`, `defractionalize <patent>` | share classes |
//! | `pay-with <class>` | designates the payment class |
//! | `list <name> <patent> sale\|license <price>`, `cancel <listing>` | listings |
//! | `request <name> <listing> <nda..>`, `settle <agreement>` | license or purchase |
//! | `royalties <agreement>` | pays out pooled revenue |
//! | `portfolio <name> <patent>..` | bundles patents |
//! | `report-dispute <patent>` | collects ownership evidence |
//!
//! Faults are `fault <tick> <kind> <target> [args]` with kinds
//! `drop-message <node|*> [count]`, `delay-message <node|*> [ticks] [extra]`,
//! `byzantine-equivocate <node>` and `corrupt-storage-chunk <doc> [chunk]
//! [offset]`.

mod report;
mod runner;
mod script;

pub use report::{RunReport, StepOutcome, StepRecord};
pub use runner::{run_scenario, ScenarioRun};
pub use script::{FaultEntry, FaultKind, ScenarioScript, ScriptError, Step};
