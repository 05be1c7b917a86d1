use std::collections::BTreeMap;
use std::fmt;

use crate::crypto::Digest;
use crate::ledger::SubmissionStatus;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Committed { height: u64, receipt: String },
    Rejected(String),
    OffLedger(String),
    /// The transaction never gathered a quorum.
    Stalled,
    /// Not attempted because an earlier step stalled.
    Skipped,
}

impl fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepOutcome::Committed { height, receipt } => write!(f, "block {height}: {receipt}"),
            StepOutcome::Rejected(reason) => write!(f, "rejected: {reason}"),
            StepOutcome::OffLedger(text) => f.write_str(text),
            StepOutcome::Stalled => f.write_str("stalled: no quorum"),
            StepOutcome::Skipped => f.write_str("skipped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub index: usize,
    pub line: usize,
    pub text: String,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub seed: u64,
    pub final_state_hash: Digest,
    /// Blocks after genesis on the reference replica.
    pub blocks_committed: u64,
    pub submissions_by_status: BTreeMap<SubmissionStatus, usize>,
    pub invariant_violations: Vec<String>,
    pub stalled: bool,
    pub ticks: u64,
    pub steps: Vec<StepRecord>,
    pub faults: Vec<String>,
    pub logins: Vec<String>,
    pub disputes: Vec<String>,
    pub storage_alarms: Vec<String>,
    /// `(label, username)` for every actor the script mentioned.
    pub actors: Vec<(String, String)>,
}

impl RunReport {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            final_state_hash: Digest::ZERO,
            blocks_committed: 0,
            submissions_by_status: BTreeMap::new(),
            invariant_violations: Vec::new(),
            stalled: false,
            ticks: 0,
            steps: Vec::new(),
            faults: Vec::new(),
            logins: Vec::new(),
            disputes: Vec::new(),
            storage_alarms: Vec::new(),
            actors: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.invariant_violations.is_empty()
    }

    pub fn count(&self, status: SubmissionStatus) -> usize {
        self.submissions_by_status.get(&status).copied().unwrap_or(0)
    }

    /// Replaces usernames with the script's actor labels.
    fn alias(&self, text: &str) -> String {
        let mut out = text.to_owned();
        for (label, user) in &self.actors {
            out = out.replace(user.as_str(), label);
        }
        out
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "final_state_hash: {}", self.final_state_hash)?;
        writeln!(f, "blocks_committed: {}", self.blocks_committed)?;
        writeln!(f, "ticks: {}", self.ticks)?;
        writeln!(f, "stalled: {}", self.stalled)?;
        writeln!(f, "submissions_by_status:")?;
        for (status, count) in &self.submissions_by_status {
            writeln!(f, "  {}: {count}", status.name())?;
        }
        writeln!(f, "invariant_violations: {}", self.invariant_violations.len())?;
        for v in &self.invariant_violations {
            writeln!(f, "  {}", self.alias(v))?;
        }
        writeln!(f, "actors:")?;
        for (label, user) in &self.actors {
            writeln!(f, "  {label} = {user}")?;
        }
        writeln!(f, "steps:")?;
        for step in &self.steps {
            writeln!(f, "  [{}] line {}: {}", step.index, step.line, step.text)?;
            writeln!(f, "      {}", self.alias(&step.outcome.to_string()))?;
        }
        let sections = [
            ("faults", &self.faults),
            ("logins", &self.logins),
            ("storage_alarms", &self.storage_alarms),
        ];
        for (title, lines) in sections {
            writeln!(f, "{title}: {}", lines.len())?;
            for line in lines {
                writeln!(f, "  {}", self.alias(line))?;
            }
        }
        writeln!(f, "disputes: {}", self.disputes.len())?;
        for dispute in &self.disputes {
            for line in self.alias(dispute).lines() {
                writeln!(f, "  {line}")?;
            }
        }
        Ok(())
    }
}
