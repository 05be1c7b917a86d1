use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certs::CertificateAuthority;
use crate::consensus::{Behavior, Cluster, ClusterConfig, LinkFault};
use crate::content_store::{ContentId, ContentStore};
use crate::crypto::{sha256, sha256_parts, KeyPair};
use crate::identity::{answer_challenge, username_of, ServiceProvider, DEFAULT_FRESHNESS_WINDOW};
use crate::ledger::{
    dispute_report, Checks, Decision, GenesisBuilder, Ledger, LedgerState, Op, Receipt, Transaction, Verdict,
};
use crate::market::{portfolio_manifest, sign_terms, ListingMode};
use crate::token::{ApprovalScope, Asset, Fungibility, NftId};

use super::report::{RunReport, StepOutcome, StepRecord};
use super::script::{FaultEntry, FaultKind, ScenarioScript, ScriptError, Step};

/// Rounds a single transaction may take to commit before the run is declared
/// stalled.
const COMMIT_PATIENCE_ROUNDS: u64 = 40;

/// A finished run: the report plus the reference replica's chain and the
/// shared content store.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: RunReport,
    pub ledger: Ledger,
    pub store: ContentStore,
}

impl ScenarioRun {
    pub fn dump(&self) -> String {
        self.ledger.dump()
    }
}

/// Runs `script` end to end and reports on it.
pub fn run_scenario(script: &ScenarioScript) -> Result<ScenarioRun, ScriptError> {
    let mut runner = Runner::new(script);
    for (index, step) in script.steps.iter().enumerate() {
        if !step.genesis && runner.cluster.is_none() {
            runner.start(index, step)?;
        }
        let outcome = if runner.stalled && !step.genesis && is_ledger_command(&step.command) {
            StepOutcome::Skipped
        } else {
            runner.execute(index, step)?
        };
        runner.report.steps.push(StepRecord {
            index,
            line: step.line,
            text: step.to_string(),
            outcome,
        });
    }
    if runner.cluster.is_none() {
        let line = script.steps.last().map_or(0, |s| s.line);
        runner.start(script.steps.len(), &Step {
            line,
            actor: String::new(),
            command: String::new(),
            args: Vec::new(),
            expect_reject: false,
            genesis: false,
        })?;
    }
    Ok(runner.finish())
}

fn is_ledger_command(command: &str) -> bool {
    !matches!(
        command,
        "upload" | "upload-random" | "upload-file" | "fetch" | "read" | "login" | "report-dispute"
    )
}

#[derive(Debug, Clone)]
enum Named {
    Document(ContentId, Vec<u8>),
    Chain(u64),
    Submission(u64),
    Class(u64),
    Nft(NftId),
    Listing(u64),
    Agreement(u64),
}

/// What to remember once a transaction's receipt is known.
#[derive(Debug, Clone)]
enum Bind {
    Nothing,
    Name(String),
    Validator(String),
}

struct Runner<'a> {
    script: &'a ScenarioScript,
    keys: BTreeMap<String, KeyPair>,
    names: BTreeMap<String, Named>,
    authorities: BTreeMap<String, CertificateAuthority>,
    providers: BTreeMap<String, ServiceProvider>,
    genesis: Option<GenesisBuilder>,
    store: ContentStore,
    cluster: Option<Cluster>,
    faults_applied: usize,
    stalled: bool,
    report: RunReport,
}

type StepResult = Result<StepOutcome, String>;

enum Inclusion {
    Committed(u64, Receipt),
    Rejected(String),
    Stalled,
}

impl<'a> Runner<'a> {
    fn new(script: &'a ScenarioScript) -> Self {
        Self {
            script,
            keys: BTreeMap::new(),
            names: BTreeMap::new(),
            authorities: BTreeMap::new(),
            providers: BTreeMap::new(),
            genesis: Some(GenesisBuilder::new(script.profile)),
            store: ContentStore::new(),
            cluster: None,
            faults_applied: 0,
            stalled: false,
            report: RunReport::new(script.seed),
        }
    }

    fn key(&mut self, actor: &str) -> KeyPair {
        self.keys
            .entry(actor.to_owned())
            .or_insert_with(|| KeyPair::derive(self.script.seed, actor))
            .clone()
    }

    fn user(&mut self, actor: &str) -> String {
        username_of(&self.key(actor).public_key())
    }

    fn state(&self) -> &LedgerState {
        match (&self.cluster, &self.genesis) {
            (Some(cluster), _) => cluster.reference().ledger().state(),
            (None, Some(genesis)) => genesis.state(),
            (None, None) => unreachable!("either genesis or the cluster exists"),
        }
    }

    fn store(&self) -> &ContentStore {
        match &self.cluster {
            Some(cluster) => cluster.store(),
            None => &self.store,
        }
    }

    fn store_mut(&mut self) -> &mut ContentStore {
        match &mut self.cluster {
            Some(cluster) => cluster.store_mut(),
            None => &mut self.store,
        }
    }

    fn now(&self) -> u64 {
        self.cluster.as_ref().map_or(0, Cluster::now)
    }

    /// Seals genesis and boots one replica per genesis validator.
    fn start(&mut self, index: usize, step: &Step) -> Result<(), ScriptError> {
        let builder = self.genesis.take().expect("genesis still open");
        let validators: Vec<String> = builder
            .state()
            .validators()
            .active_at(1)
            .into_iter()
            .map(str::to_owned)
            .collect();
        if validators.is_empty() {
            return Err(ScriptError::Step {
                index,
                line: step.line,
                message: "genesis admits no validator".into(),
            });
        }
        let by_user: BTreeMap<String, KeyPair> = self
            .keys
            .values()
            .map(|k| (username_of(&k.public_key()), k.clone()))
            .collect();
        let keys: Vec<KeyPair> = validators.iter().map(|v| by_user[v].clone()).collect();
        let block = builder.build();
        let mut cluster = Cluster::new(
            &block,
            keys,
            self.script.profile,
            ClusterConfig {
                seed: self.script.seed,
                ticks_per_round: self.script.ticks_per_round,
                ..ClusterConfig::new(self.script.seed)
            },
        )
        .map_err(|e| ScriptError::Step {
            index,
            line: step.line,
            message: format!("genesis block rejected: {e}"),
        })?;
        *cluster.store_mut() = std::mem::take(&mut self.store);
        self.cluster = Some(cluster);
        self.check_after_block(0);
        Ok(())
    }

    fn execute(&mut self, index: usize, step: &Step) -> Result<StepOutcome, ScriptError> {
        let fail = |message: String| ScriptError::Step {
            index,
            line: step.line,
            message,
        };
        match self.dispatch(step) {
            Ok(StepOutcome::Rejected(reason)) if !step.expect_reject => Err(fail(format!("rejected: {reason}"))),
            Ok(StepOutcome::Rejected(reason)) => Ok(StepOutcome::Rejected(reason)),
            Ok(outcome) if step.expect_reject && !matches!(outcome, StepOutcome::Skipped | StepOutcome::Stalled) => {
                Err(fail(format!("expected a rejection, got {outcome}")))
            }
            Ok(outcome) => Ok(outcome),
            Err(message) => Err(fail(message)),
        }
    }

    // ---- command table ---------------------------------------------------

    fn dispatch(&mut self, step: &Step) -> StepResult {
        let actor = step.actor.as_str();
        let args: Vec<&str> = step.args.iter().map(String::as_str).collect();
        let me = self.user(actor);
        let (op, bind) = match (step.command.as_str(), args.as_slice()) {
            ("authority", []) => {
                let key = self.key(actor);
                self.authorities
                    .insert(actor.to_owned(), CertificateAuthority::new(actor, key.clone()));
                let op = Op::RegisterAuthority {
                    name: actor.to_owned(),
                    public_key: key.public_key(),
                };
                return self.submit_as(actor, actor.to_owned(), op, Bind::Nothing);
            }
            ("identity", []) => (
                Op::RegisterIdentity {
                    public_key: self.key(actor).public_key(),
                },
                Bind::Nothing,
            ),
            ("validator", [ca]) => {
                let not_before = self.now();
                let public_key = self.key(actor).public_key();
                let authority = self
                    .authorities
                    .get_mut(*ca)
                    .ok_or_else(|| format!("{ca} is not a certificate authority"))?;
                let certificate = authority
                    .issue_certificate(&me, public_key, not_before, u64::MAX)
                    .map_err(|e| e.to_string())?;
                (Op::AdmitValidator { certificate }, Bind::Validator(actor.to_owned()))
            }
            ("upload", [doc, words @ ..]) if !words.is_empty() => {
                return Ok(self.upload(doc, words.join(" ").into_bytes()));
            }
            ("upload-random", [doc, size]) => {
                let size: usize = parse_num(size)? as usize;
                let digest = sha256_parts(&[&self.script.seed.to_be_bytes(), doc.as_bytes()]);
                let mut rng = ChaCha8Rng::from_seed(digest.0);
                let mut data = vec![0; size];
                rng.fill_bytes(&mut data);
                return Ok(self.upload(doc, data));
            }
            ("upload-file", [doc, path]) => {
                let full = self.script.base_dir.join(path);
                let data = std::fs::read(&full).map_err(|e| format!("{}: {e}", full.display()))?;
                return Ok(self.upload(doc, data));
            }
            ("fetch", [doc]) => return self.fetch(doc),
            ("read", [patent]) => return self.read(&me, patent),
            ("login", [provider]) => return self.login(actor, provider),
            ("report-dispute", [patent]) => return self.report_dispute(patent),
            ("poe", [chain, doc]) => {
                let (_, data) = self.document(doc)?;
                let existing = match self.names.get(*chain) {
                    Some(Named::Chain(id)) => Some(*id),
                    Some(_) => return Err(format!("{chain} is not a proof-of-existence chain")),
                    None => None,
                };
                let op = Op::RecordExistence {
                    chain: existing,
                    doc_hash: sha256(&data),
                };
                (op, Bind::Name((*chain).to_owned()))
            }
            ("submit", [name, doc, rest @ ..]) => {
                let (doc_cid, _) = self.document(doc)?;
                let mut poe_chain = None;
                let mut supersedes = None;
                for pair in rest.chunks(2) {
                    match pair {
                        ["poe", chain] => poe_chain = Some(self.chain(chain)?),
                        ["supersedes", sub] => supersedes = Some(self.submission(sub)?),
                        _ => return Err(format!("unexpected submit options {pair:?}")),
                    }
                }
                let op = Op::SubmitPatent {
                    doc_cid,
                    poe_chain,
                    supersedes,
                };
                (op, Bind::Name((*name).to_owned()))
            }
            ("verdict", [sub, decision, rest @ ..]) => {
                let submission_id = self.submission(sub)?;
                let (decision, malicious) = match *decision {
                    "malicious" => (Decision::Refuse, true),
                    other => (Decision::parse(other).ok_or_else(|| format!("unknown decision {other:?}"))?, false),
                };
                let mut checks = if decision == Decision::Grant {
                    Checks::PASS
                } else {
                    Checks {
                        substantive_exam: false,
                        ..Checks::PASS
                    }
                };
                let failed = rest.iter().take_while(|w| w.starts_with("fail:")).count();
                for word in &rest[..failed] {
                    match &word["fail:".len()..] {
                        "formal" => checks.formal_exam = false,
                        "prior-art" => checks.prior_art = false,
                        "substantive" => checks.substantive_exam = false,
                        other => return Err(format!("unknown check {other:?}")),
                    }
                }
                let comment = &rest[failed..];
                let key = self.key(actor);
                let verdict = Verdict::signed(&key, &me, submission_id, checks, decision, malicious, &comment.join(" "));
                (Op::CastVerdict { verdict }, Bind::Nothing)
            }
            ("finalize", [sub]) => (
                Op::FinalizeSubmission {
                    submission_id: self.submission(sub)?,
                },
                Bind::Nothing,
            ),
            ("class", [name, symbol, kind, rest @ ..]) => {
                let fungibility = match *kind {
                    "fungible" => Fungibility::Fungible,
                    "nft" => Fungibility::NonFungible,
                    "semi" => Fungibility::SemiFungible,
                    other => return Err(format!("unknown class kind {other:?}")),
                };
                let op = Op::CreateClass {
                    symbol: (*symbol).to_owned(),
                    fungibility,
                    metadata_cid: self.meta_option(rest)?,
                };
                (op, Bind::Name((*name).to_owned()))
            }
            ("mint-nft", [name, class, rest @ ..]) => {
                let op = Op::MintNft {
                    class_id: self.class(class)?,
                    metadata_cid: self.meta_option(rest)?,
                };
                (op, Bind::Name((*name).to_owned()))
            }
            ("mint-ft", [class, amount]) => (
                Op::MintFt {
                    class_id: self.class(class)?,
                    amount: parse_num(amount)?,
                },
                Bind::Nothing,
            ),
            ("transfer", [to, asset, rest @ ..]) => {
                let from = self.from_option(rest, &me)?;
                let op = Op::Transfer {
                    from,
                    to: self.user(to),
                    asset: self.asset(asset)?,
                };
                (op, Bind::Nothing)
            }
            ("batch", [to, rest @ ..]) => {
                let split = rest.iter().position(|w| *w == "from").unwrap_or(rest.len());
                let from = self.from_option(&rest[split..], &me)?;
                let assets = rest[..split]
                    .iter()
                    .map(|a| self.asset(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let op = Op::BatchTransfer {
                    from,
                    to: self.user(to),
                    assets,
                };
                (op, Bind::Nothing)
            }
            ("approve", [operator, scope, rest @ ..]) => {
                let scope = match *scope {
                    "all" => ApprovalScope::AllClasses,
                    class => ApprovalScope::Class(self.class(class)?),
                };
                let approved = match rest {
                    [] => true,
                    ["revoke"] => false,
                    _ => return Err("approve takes an optional `revoke`".into()),
                };
                let op = Op::SetApproval {
                    operator: self.user(operator),
                    scope,
                    approved,
                };
                (op, Bind::Nothing)
            }
            ("fractionalize", [patent, shares, name]) => {
                let op = Op::Fractionalize {
                    patent: self.nft(patent)?,
                    shares: parse_num(shares)?,
                };
                (op, Bind::Name((*name).to_owned()))
            }
            ("defractionalize", [patent]) => (Op::Defractionalize { patent: self.nft(patent)? }, Bind::Nothing),
            ("pay-with", [class]) => (Op::SetPaymentClass { class_id: self.class(class)? }, Bind::Nothing),
            ("list", [name, patent, mode, price]) => {
                let op = Op::CreateListing {
                    patent: self.nft(patent)?,
                    mode: ListingMode::parse(mode).ok_or_else(|| format!("unknown listing mode {mode:?}"))?,
                    price: parse_num(price)?,
                };
                (op, Bind::Name((*name).to_owned()))
            }
            ("cancel", [listing]) => (
                Op::CancelListing {
                    listing_id: self.listing(listing)?,
                },
                Bind::Nothing,
            ),
            ("request", [name, listing, nda @ ..]) if !nda.is_empty() => {
                let listing_id = self.listing(listing)?;
                let mode = self
                    .state()
                    .market()
                    .listing(listing_id)
                    .map(|l| l.mode)
                    .ok_or_else(|| format!("listing {listing} is not on the ledger"))?;
                let nda_hash = sha256(nda.join(" ").as_bytes());
                let signature = sign_terms(&self.key(actor), listing_id, &me, &nda_hash);
                let op = match mode {
                    ListingMode::License => Op::RequestLicense {
                        listing_id,
                        nda_hash,
                        signature,
                    },
                    ListingMode::Sale => Op::RequestPurchase {
                        listing_id,
                        nda_hash,
                        signature,
                    },
                };
                (op, Bind::Name((*name).to_owned()))
            }
            ("settle", [agreement]) => {
                let agreement_id = self.agreement(agreement)?;
                let terms = self
                    .state()
                    .market()
                    .agreement(agreement_id)
                    .map(|a| (a.listing_id, a.consumer.clone(), a.nda_hash))
                    .ok_or_else(|| format!("agreement {agreement} is not on the ledger"))?;
                let signature = sign_terms(&self.key(actor), terms.0, &terms.1, &terms.2);
                (Op::ApproveAndSettle { agreement_id, signature }, Bind::Nothing)
            }
            ("royalties", [agreement]) => (
                Op::DistributeRoyalties {
                    agreement_id: self.agreement(agreement)?,
                },
                Bind::Nothing,
            ),
            ("portfolio", [name, patents @ ..]) if !patents.is_empty() => {
                let patents = patents.iter().map(|p| self.nft(p)).collect::<Result<Vec<_>, _>>()?;
                let metadata_cid = self.store_mut().put_object(&portfolio_manifest(&patents));
                (Op::CompoundPortfolio { patents, metadata_cid }, Bind::Name((*name).to_owned()))
            }
            (command, _) => return Err(format!("unknown command or arguments: {command} {}", args.join(" "))),
        };
        self.submit_as(actor, me, op, bind)
    }

    // ---- name resolution -------------------------------------------------

    fn document(&self, name: &str) -> Result<(ContentId, Vec<u8>), String> {
        match self.names.get(name) {
            Some(Named::Document(cid, data)) => Ok((cid.clone(), data.clone())),
            _ => Err(format!("{name} is not an uploaded document")),
        }
    }

    fn chain(&self, name: &str) -> Result<u64, String> {
        match self.names.get(name) {
            Some(Named::Chain(id)) => Ok(*id),
            _ => Err(format!("{name} is not a proof-of-existence chain")),
        }
    }

    fn submission(&self, name: &str) -> Result<u64, String> {
        match self.names.get(name) {
            Some(Named::Submission(id)) => Ok(*id),
            _ => Err(format!("{name} is not a submission")),
        }
    }

    fn class(&self, name: &str) -> Result<u64, String> {
        match self.names.get(name) {
            Some(Named::Class(id)) => Ok(*id),
            _ => name.parse().map_err(|_| format!("{name} is not a token class")),
        }
    }

    /// An NFT by name, by `class:instance`, or the token a granted
    /// submission minted.
    fn nft(&self, name: &str) -> Result<NftId, String> {
        match self.names.get(name) {
            Some(Named::Nft(id)) => return Ok(*id),
            Some(Named::Submission(id)) => {
                return self
                    .state()
                    .submission(*id)
                    .and_then(|s| s.nft)
                    .ok_or_else(|| format!("submission {name} has not minted a patent"))
            }
            _ => {}
        }
        let (class, instance) = name.split_once(':').ok_or_else(|| format!("{name} is not an NFT"))?;
        Ok(NftId::new(parse_num(class)?, parse_num(instance)?))
    }

    fn listing(&self, name: &str) -> Result<u64, String> {
        match self.names.get(name) {
            Some(Named::Listing(id)) => Ok(*id),
            _ => Err(format!("{name} is not a listing")),
        }
    }

    fn agreement(&self, name: &str) -> Result<u64, String> {
        match self.names.get(name) {
            Some(Named::Agreement(id)) => Ok(*id),
            _ => Err(format!("{name} is not an agreement")),
        }
    }

    /// `<class>:<amount>` for balances, otherwise an NFT reference.
    fn asset(&self, word: &str) -> Result<Asset, String> {
        if let Some((class, amount)) = word.split_once(':') {
            if let (Ok(class_id), Ok(amount)) = (self.class(class), amount.parse()) {
                if !matches!(self.names.get(word), Some(Named::Nft(_))) {
                    return Ok(Asset::Fungible { class_id, amount });
                }
            }
        }
        self.nft(word).map(Asset::Nft)
    }

    fn meta_option(&self, rest: &[&str]) -> Result<Option<ContentId>, String> {
        match rest {
            [] => Ok(None),
            ["meta", doc] => Ok(Some(self.document(doc)?.0)),
            _ => Err(format!("unexpected options {rest:?}")),
        }
    }

    fn from_option(&mut self, rest: &[&str], me: &str) -> Result<String, String> {
        match rest {
            [] => Ok(me.to_owned()),
            ["from", owner] => Ok(self.user(owner)),
            _ => Err(format!("unexpected options {rest:?}")),
        }
    }

    // ---- off-ledger commands ---------------------------------------------

    fn upload(&mut self, name: &str, data: Vec<u8>) -> StepOutcome {
        let cid = self.store_mut().put_object(&data);
        let text = format!("stored {} bytes as {cid}", data.len());
        self.names.insert(name.to_owned(), Named::Document(cid, data));
        StepOutcome::OffLedger(text)
    }

    fn fetch(&mut self, name: &str) -> StepResult {
        let (cid, _) = self.document(name)?;
        Ok(match self.store().get_object(&cid) {
            Ok(data) => StepOutcome::OffLedger(format!("retrieved {} bytes", data.len())),
            Err(e) => {
                let alarm = format!("{name}: {e}");
                self.report.storage_alarms.push(alarm.clone());
                StepOutcome::OffLedger(format!("integrity alarm: {e}"))
            }
        })
    }

    /// Retrieves a patent's document on behalf of `user`, if the marketplace
    /// grants access.
    fn read(&mut self, user: &str, patent: &str) -> StepResult {
        let id = self.nft(patent)?;
        let state = self.state();
        if !state.market().has_access(state.tokens(), user, id) {
            return Ok(StepOutcome::Rejected(format!("no access to {id}")));
        }
        let cid = state
            .tokens()
            .instance(id)
            .and_then(|i| i.metadata_cid.clone())
            .ok_or_else(|| format!("{id} has no document"))?;
        Ok(match self.store().get_object(&cid) {
            Ok(data) => StepOutcome::OffLedger(format!("read {} bytes of {id}", data.len())),
            Err(e) => {
                self.report.storage_alarms.push(format!("{patent}: {e}"));
                StepOutcome::OffLedger(format!("integrity alarm: {e}"))
            }
        })
    }

    /// The six-step login against `provider`, then a replay of the same
    /// credential.
    fn login(&mut self, actor: &str, provider: &str) -> StepResult {
        let user = self.user(actor);
        let user_key = self.key(actor);
        let provider_key = self.key(provider);
        let now = self.state().tick();
        let registry = self.state().identities().clone();
        let service = self
            .providers
            .entry(provider.to_owned())
            .or_insert_with(|| ServiceProvider::new(provider_key));
        let attempt = (|| {
            let request = service.initiate_login(&user, &registry, now).map_err(|e| e.to_string())?;
            let record = registry.require(service.name()).map_err(|e| e.to_string())?;
            let credential = answer_challenge(&user_key, &request, record).map_err(|e| e.to_string())?;
            service
                .verify_login(&credential, &registry, now, DEFAULT_FRESHNESS_WINDOW)
                .map_err(|e| e.to_string())?;
            let replay = service.verify_login(&credential, &registry, now, DEFAULT_FRESHNESS_WINDOW);
            Ok::<_, String>(replay.is_err())
        })();
        Ok(match attempt {
            Ok(replay_rejected) => {
                let text = format!(
                    "{actor} logged in to {provider}; replay {}",
                    if replay_rejected { "rejected" } else { "ACCEPTED" }
                );
                self.report.logins.push(text.clone());
                if !replay_rejected {
                    self.report
                        .invariant_violations
                        .push(format!("login replay accepted for {actor} at {provider}"));
                }
                StepOutcome::OffLedger(text)
            }
            Err(reason) => {
                self.report.logins.push(format!("{actor} at {provider}: {reason}"));
                StepOutcome::Rejected(reason)
            }
        })
    }

    fn report_dispute(&mut self, patent: &str) -> StepResult {
        let id = self.nft(patent)?;
        let cluster = self.cluster.as_ref().ok_or("disputes need a running ledger")?;
        let blocks = cluster.reference().ledger().blocks();
        match dispute_report(blocks, self.script.profile, id).map_err(|e| e.to_string())? {
            Some(report) => {
                let text = report.to_string();
                self.report.disputes.push(text);
                Ok(StepOutcome::OffLedger(format!(
                    "evidence for {id}: granted in block {}, {} existence stages, {} ownership records",
                    report.grant_height,
                    report.poe_chain.len(),
                    report.ownership.len()
                )))
            }
            None => Ok(StepOutcome::Rejected(format!("{id} was not granted as a patent"))),
        }
    }

    // ---- ledger commands -------------------------------------------------

    fn submit_as(&mut self, actor: &str, author: String, op: Op, bind: Bind) -> StepResult {
        let key = self.key(actor);
        let sequence = self.state().next_sequence(&author);
        let tx = Transaction::new(&key, &author, sequence, &op);
        let (height, receipt) = if let Some(genesis) = &mut self.genesis {
            match genesis.push_tx(tx) {
                Ok(receipt) => (0, receipt),
                Err(e) => return Ok(StepOutcome::Rejected(e.to_string())),
            }
        } else {
            match self.commit(&tx, &author, sequence)? {
                Inclusion::Committed(height, receipt) => (height, receipt),
                Inclusion::Rejected(reason) => return Ok(StepOutcome::Rejected(reason)),
                Inclusion::Stalled => {
                    self.stalled = true;
                    return Ok(StepOutcome::Stalled);
                }
            }
        };
        self.bind(bind, &receipt);
        Ok(StepOutcome::Committed {
            height,
            receipt: receipt.to_string(),
        })
    }

    /// Pre-checks `tx` against the reference replica, hands it to every
    /// replica and steps until it is committed.
    fn commit(&mut self, tx: &Transaction, author: &str, sequence: u64) -> Result<Inclusion, String> {
        let cluster = self.cluster.as_mut().expect("cluster running");
        let now = cluster.now();
        let state = cluster.reference().ledger().state();
        if let Err(e) = state.check_tx(tx, now.max(state.tick() + 1), Some(cluster.store())) {
            return Ok(Inclusion::Rejected(e.to_string()));
        }
        cluster.submit(tx);
        let patience = COMMIT_PATIENCE_ROUNDS * self.script.ticks_per_round;
        let included = |c: &Cluster| c.reference().ledger().state().next_sequence(author) > sequence;
        let mut committed = false;
        for _ in 0..patience {
            if included(self.cluster.as_ref().expect("cluster running")) {
                committed = true;
                break;
            }
            self.tick().map_err(|e| e.to_string())?;
        }
        if !committed {
            return Ok(Inclusion::Stalled);
        }
        let cluster = self.cluster.as_ref().expect("cluster running");
        let ledger = cluster.reference().ledger();
        for block in ledger.blocks().iter().rev() {
            if let Some(pos) = block.txs.iter().position(|t| t == tx) {
                let receipt = ledger.receipts(block.height).expect("committed block")[pos].clone();
                return Ok(Inclusion::Committed(block.height, receipt));
            }
        }
        Err("transaction vanished from the chain".into())
    }

    /// Applies due faults, advances the cluster one tick and checks every
    /// newly committed block.
    fn tick(&mut self) -> Result<(), String> {
        self.apply_faults()?;
        let cluster = self.cluster.as_mut().expect("cluster running");
        let before = cluster.max_honest_height();
        cluster.step();
        let after = cluster.max_honest_height();
        if after > before {
            self.check_after_block(after - 1);
        }
        Ok(())
    }

    fn apply_faults(&mut self) -> Result<(), String> {
        let now = self.now();
        while let Some(fault) = self.script.fault_schedule.get(self.faults_applied) {
            if fault.tick > now {
                break;
            }
            self.faults_applied += 1;
            let text = self.apply_fault(fault).map_err(|e| format!("fault on line {}: {e}", fault.line))?;
            self.report.faults.push(format!("tick {now}: {text}"));
        }
        Ok(())
    }

    fn apply_fault(&mut self, fault: &FaultEntry) -> Result<String, String> {
        let arg = |i: usize, default: u64| fault.args.get(i).copied().unwrap_or(default);
        let description = format!("{} {}", fault.kind.name(), fault.target);
        if fault.kind == FaultKind::CorruptStorageChunk {
            let (cid, _) = self.document(&fault.target)?;
            self.store_mut()
                .corrupt(&cid, arg(0, 0) as usize, arg(1, 0) as usize)
                .map_err(|e| e.to_string())?;
            return Ok(description);
        }
        let sender = if fault.target == "*" {
            None
        } else {
            let user = self.user(&fault.target);
            let cluster = self.cluster.as_ref().expect("cluster running");
            Some(
                cluster
                    .node_id(&user)
                    .ok_or_else(|| format!("{} is not a validator node", fault.target))?,
            )
        };
        let cluster = self.cluster.as_mut().expect("cluster running");
        let now = cluster.now();
        let round = cluster.config().ticks_per_round;
        match fault.kind {
            FaultKind::DropMessage => cluster.network_mut().add_fault(LinkFault::Drop {
                from: sender,
                start: now,
                count: arg(0, 1),
            }),
            FaultKind::DelayMessage => cluster.network_mut().add_fault(LinkFault::Delay {
                from: sender,
                start: now,
                end: now + arg(0, 1),
                extra: arg(1, round),
            }),
            FaultKind::ByzantineEquivocate => {
                let id = sender.ok_or("byzantine-equivocate needs a single validator")?;
                cluster.set_behavior(id, Behavior::Equivocate);
            }
            FaultKind::CorruptStorageChunk => unreachable!("handled above"),
        }
        Ok(description)
    }

    fn check_after_block(&mut self, height: u64) {
        let cluster = self.cluster.as_ref().expect("cluster running");
        for problem in cluster.reference().ledger().state().check_invariants() {
            self.report
                .invariant_violations
                .push(format!("block {height}: {problem}"));
        }
        for conflict in cluster.conflicts() {
            if !self.report.invariant_violations.contains(&conflict) {
                self.report.invariant_violations.push(conflict);
            }
        }
    }

    fn bind(&mut self, bind: Bind, receipt: &Receipt) {
        match bind {
            Bind::Nothing => {}
            Bind::Validator(actor) => {
                let key = self.key(&actor);
                let user = username_of(&key.public_key());
                if let Some(cluster) = &mut self.cluster {
                    if cluster.node_id(&user).is_none() {
                        cluster.add_node(key, Behavior::Honest);
                    }
                }
            }
            Bind::Name(name) => {
                let named = match receipt {
                    Receipt::ExistenceRecorded { chain_id, .. } => Named::Chain(*chain_id),
                    Receipt::Submitted { submission_id } => Named::Submission(*submission_id),
                    Receipt::ClassCreated { class_id } => Named::Class(*class_id),
                    Receipt::NftMinted(id) | Receipt::PortfolioMinted(id) => Named::Nft(*id),
                    Receipt::Fractionalized { shares_class_id, .. } => Named::Class(*shares_class_id),
                    Receipt::Listed { listing_id } => Named::Listing(*listing_id),
                    Receipt::AgreementOpened { agreement_id } => Named::Agreement(*agreement_id),
                    _ => return,
                };
                self.names.insert(name, named);
            }
        }
    }

    fn finish(mut self) -> ScenarioRun {
        let cluster = self.cluster.take().expect("cluster running");
        let ledger = cluster.reference().ledger().clone();
        let state = ledger.state();
        self.report.final_state_hash = state.state_hash();
        self.report.blocks_committed = ledger.height().saturating_sub(1);
        self.report.ticks = cluster.now();
        self.report.stalled = self.stalled;
        for status in crate::ledger::SubmissionStatus::ALL {
            self.report.submissions_by_status.insert(status, 0);
        }
        for (status, count) in state.status_counts() {
            self.report.submissions_by_status.insert(status, count);
        }
        for conflict in cluster.conflicts() {
            if !self.report.invariant_violations.contains(&conflict) {
                self.report.invariant_violations.push(conflict);
            }
        }
        self.report.actors = self
            .keys
            .iter()
            .map(|(label, key)| (label.clone(), username_of(&key.public_key())))
            .collect();
        ScenarioRun {
            report: self.report,
            ledger,
            store: cluster.store().clone(),
        }
    }
}

fn parse_num(word: &str) -> Result<u64, String> {
    word.parse().map_err(|_| format!("{word:?} is not a number"))
}
