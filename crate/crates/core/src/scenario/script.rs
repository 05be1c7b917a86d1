use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::token::Standard;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("step {index} (line {line}): {message}")]
    Step { index: usize, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// 1-based source line.
    pub line: usize,
    pub actor: String,
    pub command: String,
    pub args: Vec<String>,
    /// Written with a leading `!`: the step must be rejected.
    pub expect_reject: bool,
    /// Placed before `start`, so it belongs to the genesis block.
    pub genesis: bool,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.expect_reject {
            f.write_str("!")?;
        }
        write!(f, "{} {}", self.actor, self.command)?;
        for arg in &self.args {
            write!(f, " {arg}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    DropMessage,
    DelayMessage,
    ByzantineEquivocate,
    CorruptStorageChunk,
}

impl FaultKind {
    pub fn name(self) -> &'static str {
        match self {
            FaultKind::DropMessage => "drop-message",
            FaultKind::DelayMessage => "delay-message",
            FaultKind::ByzantineEquivocate => "byzantine-equivocate",
            FaultKind::CorruptStorageChunk => "corrupt-storage-chunk",
        }
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            FaultKind::DropMessage,
            FaultKind::DelayMessage,
            FaultKind::ByzantineEquivocate,
            FaultKind::CorruptStorageChunk,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown fault kind {s:?}"))
    }
}

/// One scheduled fault. `target` is an actor label, `*` for any sender, or a
/// document label for storage corruption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultEntry {
    pub line: usize,
    pub tick: u64,
    pub kind: FaultKind,
    pub target: String,
    pub args: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioScript {
    pub seed: u64,
    pub ticks_per_round: u64,
    pub profile: Standard,
    pub steps: Vec<Step>,
    pub fault_schedule: Vec<FaultEntry>,
    /// Directory that `upload-file` paths are relative to.
    pub base_dir: PathBuf,
}

impl ScenarioScript {
    /// Parses the line format:
    ///
    /// ```text
    /// seed 7
    /// ticks-per-round 6
    /// profile algorand
    /// office authority
    /// v1 validator office
    /// start
    /// alice upload spec a widget that folds
    /// !bob submit s1 spec
    /// fault 20 drop-message v2 5
    /// ```
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut script = ScenarioScript {
            seed: 0,
            ticks_per_round: 6,
            profile: Standard::Algorand,
            steps: Vec::new(),
            fault_schedule: Vec::new(),
            base_dir: PathBuf::from("."),
        };
        let mut started = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScriptError::Parse { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            match words[0] {
                "seed" => script.seed = number(&words, 1).map_err(err)?,
                "ticks-per-round" => {
                    script.ticks_per_round = number(&words, 1).map_err(err)?;
                    if script.ticks_per_round == 0 {
                        return Err(ScriptError::Parse {
                            line,
                            message: "ticks-per-round must be positive".into(),
                        });
                    }
                }
                "profile" => {
                    let name = words.get(1).ok_or_else(|| err("profile needs a name".into()))?;
                    script.profile = Standard::from_name(name).ok_or_else(|| err(format!("unknown profile {name:?}")))?;
                }
                "start" => {
                    if started {
                        return Err(err("duplicate start".into()));
                    }
                    started = true;
                }
                "fault" => {
                    if words.len() < 4 {
                        return Err(err("fault needs <tick> <kind> <target>".into()));
                    }
                    let tick = number(&words, 1).map_err(err)?;
                    let kind = words[2].parse().map_err(err)?;
                    let args = (4..words.len())
                        .map(|k| number(&words, k))
                        .collect::<Result<Vec<u64>, String>>()
                        .map_err(err)?;
                    script.fault_schedule.push(FaultEntry {
                        line,
                        tick,
                        kind,
                        target: words[3].to_owned(),
                        args,
                    });
                }
                first => {
                    let (expect_reject, actor) = match first.strip_prefix('!') {
                        Some(rest) => (true, rest),
                        None => (false, first),
                    };
                    if actor.is_empty() || words.len() < 2 {
                        return Err(err("expected <actor> <command> [args]".into()));
                    }
                    script.steps.push(Step {
                        line,
                        actor: actor.to_owned(),
                        command: words[1].to_owned(),
                        args: words[2..].iter().map(|w| (*w).to_owned()).collect(),
                        expect_reject,
                        genesis: !started,
                    });
                }
            }
        }
        if !started {
            return Err(ScriptError::Parse {
                line: text.lines().count(),
                message: "missing start line".into(),
            });
        }
        script.fault_schedule.sort_by_key(|f| (f.tick, f.line));
        Ok(script)
    }

    /// Reads and parses a script file; `upload-file` paths resolve against
    /// its directory.
    pub fn from_file(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Parse {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        let mut script = Self::parse(&text)?;
        script.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(script)
    }
}

fn number(words: &[&str], index: usize) -> Result<u64, String> {
    let word = words.get(index).ok_or_else(|| format!("{} needs a number", words[0]))?;
    word.parse().map_err(|_| format!("{word:?} is not a number"))
}
