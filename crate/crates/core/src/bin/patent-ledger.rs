use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use patent_ledger::codec::Canonical;
use patent_ledger::consensus::{run_trial, FaultModel, TrialConfig};
use patent_ledger::ledger::{audit_dump, replay_dump, Receipt};
use patent_ledger::poe::verify_existence;
use patent_ledger::scenario::{run_scenario, ScenarioRun, ScenarioScript, StepOutcome};
use patent_ledger::token::{render_matrix, Standard};

#[derive(Parser)]
#[command(name = "patent-ledger", version, about = "Simulated permissioned ledger for NFT-backed patents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script and write ledger.dump and report.txt.
    Run {
        script: PathBuf,
        /// Overrides the script's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-verify every block of a ledger dump.
    Audit(DumpArgs),
    #[command(subcommand)]
    Ledger(LedgerCommand),
    #[command(subcommand)]
    Consensus(ConsensusCommand),
    #[command(subcommand)]
    Identity(IdentityCommand),
    #[command(subcommand)]
    Poe(PoeCommand),
    #[command(subcommand)]
    Token(TokenCommand),
    #[command(subcommand)]
    Market(MarketCommand),
}

#[derive(Subcommand)]
enum TokenCommand {
    /// Print the standards-by-feature conformance table.
    Matrix,
    Class(Session),
    MintNft(Session),
    MintFt(Session),
    Transfer(Session),
    Batch(Session),
    Approve(Session),
    Fractionalize(Session),
    Defractionalize(Session),
    PayWith(Session),
}

#[derive(Subcommand)]
enum MarketCommand {
    List(Session),
    Cancel(Session),
    Request(Session),
    Settle(Session),
    Royalties(Session),
    Portfolio(Session),
    ReportDispute(Session),
}

#[derive(Args)]
struct DumpArgs {
    dump: PathBuf,
    #[arg(long, default_value = "algorand")]
    profile: String,
}

#[derive(Subcommand)]
enum LedgerCommand {
    Audit(DumpArgs),
    /// Rebuild the state from a dump and print its hash.
    Replay(DumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Mixed,
    Withholding,
}

#[derive(Subcommand)]
enum ConsensusCommand {
    /// Seeded fault trials; fails if any two honest replicas diverge.
    Run {
        #[arg(long)]
        validators: usize,
        #[arg(long)]
        byzantine: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        schedules: u64,
        #[arg(long, value_enum, default_value_t = Model::Mixed)]
        model: Model,
    },
}

/// A scenario script that a command appends its step to.
#[derive(Args)]
struct Session {
    #[arg(long)]
    script: PathBuf,
    #[arg(long)]
    actor: String,
    /// Step arguments, as in the script format.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

#[derive(Subcommand)]
enum IdentityCommand {
    Register {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        actor: String,
    },
    Login {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        actor: String,
        #[arg(long)]
        provider: String,
    },
}

#[derive(Subcommand)]
enum PoeCommand {
    /// Upload a file and record its hash on a named chain.
    Record {
        file: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        actor: String,
        #[arg(long, default_value = "main")]
        chain: String,
    },
    /// Check a file against a recorded stage, given as `<chain id>[:<stage>]`.
    Verify {
        file: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        record: String,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<bool, String> {
    match command {
        Command::Run { script, seed, out } => run(&script, seed, &out),
        Command::Audit(args) | Command::Ledger(LedgerCommand::Audit(args)) => audit(&args),
        Command::Ledger(LedgerCommand::Replay(args)) => {
            let text = read(&args.dump)?;
            let ledger = replay_dump(&text, profile(&args.profile)?).map_err(|e| e.to_string())?;
            println!("blocks: {}", ledger.height());
            println!("state_hash: {}", ledger.state().state_hash());
            Ok(true)
        }
        Command::Consensus(ConsensusCommand::Run {
            validators,
            byzantine,
            seed,
            schedules,
            model,
        }) => {
            let mut safe = true;
            for seed in seed..seed + schedules {
                let mut config = TrialConfig::new(validators, byzantine, seed);
                config.model = match model {
                    Model::Mixed => FaultModel::Mixed,
                    Model::Withholding => FaultModel::Withholding,
                };
                let outcome = run_trial(&config);
                let faulty: Vec<String> = outcome
                    .byzantine
                    .iter()
                    .map(|(name, b)| format!("{}:{b:?}", &name[..9]))
                    .collect();
                println!(
                    "seed {seed}: byzantine [{}] honest commits {:?} conflicts {} ticks {}",
                    faulty.join(" "),
                    outcome.honest_commits,
                    outcome.conflicts.len(),
                    outcome.ticks
                );
                for conflict in &outcome.conflicts {
                    println!("  {conflict}");
                }
                safe &= outcome.conflicts.is_empty();
            }
            Ok(safe)
        }
        Command::Identity(IdentityCommand::Register { script, actor }) => {
            session(&script, &[format!("{actor} identity")]).map(|(ok, _)| ok)
        }
        Command::Identity(IdentityCommand::Login { script, actor, provider }) => {
            session(&script, &[format!("{actor} login {provider}")]).map(|(ok, _)| ok)
        }
        Command::Poe(PoeCommand::Record {
            file,
            script,
            actor,
            chain,
        }) => {
            let base = script.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let relative = pathdiff(&file, base);
            let doc = format!("{chain}-{}", stage_count(&script, &chain)? + 1);
            let (ok, run) = session(
                &script,
                &[format!("{actor} upload-file {doc} {relative}"), format!("{actor} poe {chain} {doc}")],
            )?;
            let ledger = &run.ledger;
            let recorded = ledger.receipts(ledger.height() - 1).unwrap_or_default().iter().find_map(|r| match r {
                Receipt::ExistenceRecorded { chain_id, .. } => ledger.state().poe().chain(*chain_id),
                _ => None,
            });
            if let (true, Some(record)) = (ok, recorded.and_then(|c| c.tail())) {
                println!("record {}", hex::encode(record.to_canonical_bytes()));
            }
            Ok(ok)
        }
        Command::Poe(PoeCommand::Verify { file, script, record }) => {
            let run = load(&script)?;
            let (chain, stage) = match record.split_once(':') {
                Some((c, s)) => (c, Some(s)),
                None => (record.as_str(), None),
            };
            let chain_id: u64 = chain.parse().map_err(|_| format!("bad chain id {chain:?}"))?;
            let links = &run
                .ledger
                .state()
                .poe()
                .chain(chain_id)
                .ok_or_else(|| format!("no chain {chain_id}"))?
                .links;
            let index = match stage {
                Some(s) => s.parse::<usize>().map_err(|_| format!("bad stage {s:?}"))?.checked_sub(1),
                None => links.len().checked_sub(1),
            };
            let link = index.and_then(|i| links.get(i)).ok_or("no such stage")?;
            let ok = verify_existence(link, &fs::read(&file).map_err(|e| e.to_string())?);
            println!("{}", if ok { "verified" } else { "mismatch" });
            Ok(ok)
        }
        Command::Token(TokenCommand::Matrix) => {
            print!("{}", render_matrix());
            Ok(true)
        }
        Command::Token(op) => {
            let (name, s) = match &op {
                TokenCommand::Matrix => unreachable!("handled above"),
                TokenCommand::Class(s) => ("class", s),
                TokenCommand::MintNft(s) => ("mint-nft", s),
                TokenCommand::MintFt(s) => ("mint-ft", s),
                TokenCommand::Transfer(s) => ("transfer", s),
                TokenCommand::Batch(s) => ("batch", s),
                TokenCommand::Approve(s) => ("approve", s),
                TokenCommand::Fractionalize(s) => ("fractionalize", s),
                TokenCommand::Defractionalize(s) => ("defractionalize", s),
                TokenCommand::PayWith(s) => ("pay-with", s),
            };
            step(name, s)
        }
        Command::Market(op) => {
            let (name, s) = match &op {
                MarketCommand::List(s) => ("list", s),
                MarketCommand::Cancel(s) => ("cancel", s),
                MarketCommand::Request(s) => ("request", s),
                MarketCommand::Settle(s) => ("settle", s),
                MarketCommand::Royalties(s) => ("royalties", s),
                MarketCommand::Portfolio(s) => ("portfolio", s),
                MarketCommand::ReportDispute(s) => ("report-dispute", s),
            };
            step(name, s)
        }
    }
}

fn step(command: &str, s: &Session) -> Result<bool, String> {
    session(&s.script, &[format!("{} {command} {}", s.actor, s.args.join(" "))]).map(|(ok, _)| ok)
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn profile(name: &str) -> Result<Standard, String> {
    Standard::from_name(name).ok_or_else(|| format!("unknown profile {name:?}"))
}

fn load(script: &Path) -> Result<ScenarioRun, String> {
    let parsed = ScenarioScript::from_file(script).map_err(|e| e.to_string())?;
    run_scenario(&parsed).map_err(|e| e.to_string())
}

fn run(script: &Path, seed: Option<u64>, out: &Path) -> Result<bool, String> {
    let mut parsed = ScenarioScript::from_file(script).map_err(|e| e.to_string())?;
    if let Some(seed) = seed {
        parsed.seed = seed;
    }
    let run = run_scenario(&parsed).map_err(|e| e.to_string())?;
    fs::create_dir_all(out).map_err(|e| e.to_string())?;
    fs::write(out.join("ledger.dump"), run.dump()).map_err(|e| e.to_string())?;
    let report = run.report.to_string();
    fs::write(out.join("report.txt"), &report).map_err(|e| e.to_string())?;
    print!("{report}");
    Ok(run.report.passed())
}

fn audit(args: &DumpArgs) -> Result<bool, String> {
    let text = read(&args.dump)?;
    let report = audit_dump(&text, profile(&args.profile)?).map_err(|e| e.to_string())?;
    print!("{report}");
    Ok(report.is_clean())
}

/// Appends `lines` to the script, replays it, and keeps the change only if
/// the whole script still runs.
fn session(script: &Path, lines: &[String]) -> Result<(bool, ScenarioRun), String> {
    let mut text = read(script)?;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let before = ScenarioScript::parse(&text).map_err(|e| e.to_string())?.steps.len();
    for line in lines {
        text.push_str(line.trim_end());
        text.push('\n');
    }
    let mut parsed = ScenarioScript::parse(&text).map_err(|e| e.to_string())?;
    parsed.base_dir = script.parent().map(Path::to_path_buf).unwrap_or_default();
    let run = run_scenario(&parsed).map_err(|e| e.to_string())?;
    for record in &run.report.steps[before..] {
        println!("{}: {}", record.text, record.outcome);
    }
    let committed = run.report.steps[before..]
        .iter()
        .all(|r| !matches!(r.outcome, StepOutcome::Stalled | StepOutcome::Skipped));
    if committed {
        fs::write(script, text).map_err(|e| e.to_string())?;
    }
    Ok((committed && run.report.passed(), run))
}

fn stage_count(script: &Path, chain: &str) -> Result<usize, String> {
    let parsed = ScenarioScript::from_file(script).map_err(|e| e.to_string())?;
    Ok(parsed
        .steps
        .iter()
        .filter(|s| s.command == "poe" && s.args.first().map(String::as_str) == Some(chain))
        .count())
}

/// `file` relative to `base` when it lies beneath it, else its absolute form.
fn pathdiff(file: &Path, base: &Path) -> String {
    let absolute = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (file, base) = (absolute(file), absolute(base));
    file.strip_prefix(&base)
        .map(Path::to_path_buf)
        .unwrap_or(file)
        .display()
        .to_string()
}
