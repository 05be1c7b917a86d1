//! Evidence bundles for reporting a disputed patent to its office.

use std::fmt;

use crate::crypto::Digest;
use crate::poe::PoERecord;
use crate::token::{NftId, Standard};

use super::block::Block;
use super::examination::PatentSubmission;
use super::state::{BlockError, LedgerState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisputeReport {
    pub patent: NftId,
    pub submission: PatentSubmission,
    pub poe_chain: Vec<PoERecord>,
    pub grant_height: u64,
    pub grant_block_id: Digest,
    /// `(height, owner)` for the grant and every later change of owner.
    pub ownership: Vec<(u64, String)>,
}

impl fmt::Display for DisputeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dispute evidence for patent {}", self.patent)?;
        writeln!(
            f,
            "  submission {} by {} document {}",
            self.submission.submission_id, self.submission.applicant, self.submission.doc_cid
        )?;
        writeln!(f, "  granted in block {} ({})", self.grant_height, self.grant_block_id)?;
        for (stage, record) in self.poe_chain.iter().enumerate() {
            writeln!(
                f,
                "  existence stage {} at tick {}: {} link {}",
                stage + 1,
                record.recorded_at,
                record.doc_hash,
                record.link_hash()
            )?;
        }
        for (height, owner) in &self.ownership {
            writeln!(f, "  owner from block {height}: {owner}")?;
        }
        Ok(())
    }
}

/// Replays `blocks` and collects the evidence for `patent`, or `None` when no
/// submission was granted that token.
pub fn dispute_report(blocks: &[Block], profile: Standard, patent: NftId) -> Result<Option<DisputeReport>, BlockError> {
    let mut state = LedgerState::new(profile);
    let mut grant: Option<(u64, Digest)> = None;
    let mut ownership: Vec<(u64, String)> = Vec::new();
    for block in blocks {
        state.apply_block(block, None)?;
        let Some(owner) = state.tokens().owner_of(patent) else {
            continue;
        };
        if grant.is_none() {
            grant = Some((block.height, block.block_id()));
        }
        if ownership.last().map(|(_, o)| o.as_str()) != Some(owner) {
            ownership.push((block.height, owner.to_owned()));
        }
    }
    let Some((grant_height, grant_block_id)) = grant else {
        return Ok(None);
    };
    let Some(submission) = state.submissions().find(|s| s.nft == Some(patent)).cloned() else {
        return Ok(None);
    };
    let poe_chain = submission
        .poe_chain_ref
        .and_then(|id| state.poe().chain(id))
        .map(|c| c.links.clone())
        .unwrap_or_default();
    Ok(Some(DisputeReport {
        patent,
        submission,
        poe_chain,
        grant_height,
        grant_block_id,
        ownership,
    }))
}
