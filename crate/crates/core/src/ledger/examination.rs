//! Patent submissions, examiner verdicts and the quorum tally that resolves
//! them.

use serde::Serialize;
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::content_store::ContentId;
use crate::crypto::{verify, KeyPair, PublicKey, Signature};
use crate::token::NftId;

/// Blocks a submission may stay pending before a forced finalization
/// resolves it to a refusal.
pub const EXAMINATION_TIMEOUT_BLOCKS: u64 = 3;
pub const TIMEOUT_COMMENT: &str = "quorum timeout";

/// Byzantine majority: `floor(2n/3) + 1`.
pub fn quorum(n: usize) -> usize {
    2 * n / 3 + 1
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExamError {
    #[error("unknown submission {0}")]
    UnknownSubmission(u64),
    #[error("submission {0} is no longer pending")]
    NotPending(u64),
    #[error("{0} is not a current validator")]
    NotAValidator(String),
    #[error("{validator} already voted on submission {submission_id}")]
    AlreadyVoted { submission_id: u64, validator: String },
    #[error("a grant requires all three examinations to pass, and a malicious flag excludes a grant")]
    InconsistentVerdict,
    #[error("verdict signature does not verify")]
    BadSignature,
    #[error("no decision holds a quorum of {quorum} votes yet")]
    QuorumNotReached { quorum: usize },
    #[error("submission {0} cannot be superseded")]
    NotResubmittable(u64),
    #[error("document {0} cannot be resolved in content storage")]
    UnresolvableContent(ContentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Decision {
    Grant,
    NeedsReformation,
    Refuse,
}

impl Decision {
    pub const ALL: [Decision; 3] = [Decision::Grant, Decision::NeedsReformation, Decision::Refuse];

    fn tag(self) -> u8 {
        match self {
            Decision::Grant => 0,
            Decision::NeedsReformation => 1,
            Decision::Refuse => 2,
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "grant" => Some(Decision::Grant),
            "reform" | "needs-reformation" | "needsreformation" => Some(Decision::NeedsReformation),
            "refuse" => Some(Decision::Refuse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum SubmissionStatus {
    Pending,
    Granted,
    NeedsReformation,
    Refused,
    RejectedMalicious,
}

impl SubmissionStatus {
    pub const ALL: [SubmissionStatus; 5] = [
        SubmissionStatus::Pending,
        SubmissionStatus::Granted,
        SubmissionStatus::NeedsReformation,
        SubmissionStatus::Refused,
        SubmissionStatus::RejectedMalicious,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubmissionStatus::Pending => "Pending",
            SubmissionStatus::Granted => "Granted",
            SubmissionStatus::NeedsReformation => "NeedsReformation",
            SubmissionStatus::Refused => "Refused",
            SubmissionStatus::RejectedMalicious => "Rejected-Malicious",
        }
    }
}

impl From<Decision> for SubmissionStatus {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Grant => SubmissionStatus::Granted,
            Decision::NeedsReformation => SubmissionStatus::NeedsReformation,
            Decision::Refuse => SubmissionStatus::Refused,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Checks {
    pub formal_exam: bool,
    pub prior_art: bool,
    pub substantive_exam: bool,
}

impl Checks {
    pub const PASS: Checks = Checks {
        formal_exam: true,
        prior_art: true,
        substantive_exam: true,
    };

    pub fn all_pass(self) -> bool {
        self.formal_exam && self.prior_art && self.substantive_exam
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub submission_id: u64,
    pub validator: String,
    pub checks: Checks,
    pub decision: Decision,
    pub malicious: bool,
    pub comments: String,
    pub signature: Signature,
}

impl Verdict {
    pub fn signed(
        key_pair: &KeyPair,
        validator: &str,
        submission_id: u64,
        checks: Checks,
        decision: Decision,
        malicious: bool,
        comments: &str,
    ) -> Self {
        let mut verdict = Verdict {
            submission_id,
            validator: validator.to_owned(),
            checks,
            decision,
            malicious,
            comments: comments.to_owned(),
            signature: Signature([0; 64]),
        };
        verdict.signature = key_pair.sign(&verdict.signed_message());
        verdict
    }

    pub fn signed_message(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_content(&mut enc);
        enc.finish()
    }

    fn encode_content(&self, enc: &mut Encoder) {
        enc.u64(self.submission_id)
            .str(&self.validator)
            .bool(self.checks.formal_exam)
            .bool(self.checks.prior_art)
            .bool(self.checks.substantive_exam)
            .u8(self.decision.tag())
            .bool(self.malicious)
            .str(&self.comments);
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        verify(key, &self.signed_message(), &self.signature)
    }

    pub fn is_consistent(&self) -> bool {
        match self.decision {
            Decision::Grant => self.checks.all_pass() && !self.malicious,
            _ => true,
        }
    }

    /// The tally bucket this vote falls into.
    pub fn ballot(&self) -> Ballot {
        if self.malicious {
            Ballot::Malicious
        } else {
            Ballot::Decision(self.decision)
        }
    }
}

impl Canonical for Verdict {
    fn encode(&self, enc: &mut Encoder) {
        self.encode_content(enc);
        enc.bytes(self.signature.as_bytes());
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let submission_id = dec.u64()?;
        let validator = dec.string()?;
        let checks = Checks {
            formal_exam: dec.bool()?,
            prior_art: dec.bool()?,
            substantive_exam: dec.bool()?,
        };
        let decision = match dec.u8()? {
            0 => Decision::Grant,
            1 => Decision::NeedsReformation,
            2 => Decision::Refuse,
            tag => return Err(CodecError::BadTag { what: "decision", tag }),
        };
        Ok(Verdict {
            submission_id,
            validator,
            checks,
            decision,
            malicious: dec.bool()?,
            comments: dec.string()?,
            signature: Signature(dec.fixed()?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ballot {
    Decision(Decision),
    Malicious,
}

/// The status a set of ballots resolves to among `n` validators, or `None`
/// while no bucket holds a quorum. Buckets are disjoint per voter and a quorum
/// exceeds half of `n`, so at most one bucket can qualify.
pub fn tally(ballots: impl IntoIterator<Item = Ballot>, n: usize) -> Option<SubmissionStatus> {
    let needed = quorum(n);
    let mut counts = [0usize; 4];
    for ballot in ballots {
        let slot = match ballot {
            Ballot::Decision(d) => d.tag() as usize,
            Ballot::Malicious => 3,
        };
        counts[slot] += 1;
    }
    if counts[3] >= needed {
        return Some(SubmissionStatus::RejectedMalicious);
    }
    Decision::ALL
        .into_iter()
        .find(|d| counts[d.tag() as usize] >= needed)
        .map(SubmissionStatus::from)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatentSubmission {
    pub submission_id: u64,
    pub applicant: String,
    pub doc_cid: ContentId,
    pub poe_chain_ref: Option<u64>,
    pub supersedes: Option<u64>,
    pub status: SubmissionStatus,
    pub submitted_height: u64,
    /// Quorum size that applied when the submission left `Pending`.
    pub resolved_quorum: Option<usize>,
    pub resolution_comment: Option<String>,
    pub nft: Option<NftId>,
}
