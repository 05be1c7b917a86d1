//! Signed ledger transactions and the operations they carry.

use crate::certs::Certificate;
use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::content_store::ContentId;
use crate::crypto::{verify, Digest, KeyPair, PublicKey, Signature};
use crate::market::ListingMode;
use crate::token::{ApprovalScope, Asset, Fungibility, NftId};

use super::examination::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxKind {
    IdentityReg,
    PoERecord,
    PatentSubmission,
    TokenOp,
    MarketOp,
}

impl TxKind {
    pub fn name(self) -> &'static str {
        match self {
            TxKind::IdentityReg => "IdentityReg",
            TxKind::PoERecord => "PoERecord",
            TxKind::PatentSubmission => "PatentSubmission",
            TxKind::TokenOp => "TokenOp",
            TxKind::MarketOp => "MarketOp",
        }
    }
}

impl Canonical for TxKind {
    fn encode(&self, enc: &mut Encoder) {
        enc.u8(match self {
            TxKind::IdentityReg => 0,
            TxKind::PoERecord => 1,
            TxKind::PatentSubmission => 2,
            TxKind::TokenOp => 3,
            TxKind::MarketOp => 4,
        });
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            0 => Ok(TxKind::IdentityReg),
            1 => Ok(TxKind::PoERecord),
            2 => Ok(TxKind::PatentSubmission),
            3 => Ok(TxKind::TokenOp),
            4 => Ok(TxKind::MarketOp),
            tag => Err(CodecError::BadTag { what: "transaction kind", tag }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    RegisterIdentity { public_key: PublicKey },
    RegisterAuthority { name: String, public_key: PublicKey },
    AdmitValidator { certificate: Certificate },
    RecordExistence { chain: Option<u64>, doc_hash: Digest },
    SubmitPatent { doc_cid: ContentId, poe_chain: Option<u64>, supersedes: Option<u64> },
    CastVerdict { verdict: Verdict },
    FinalizeSubmission { submission_id: u64 },
    CreateClass { symbol: String, fungibility: Fungibility, metadata_cid: Option<ContentId> },
    MintNft { class_id: u64, metadata_cid: Option<ContentId> },
    MintFt { class_id: u64, amount: u64 },
    Transfer { from: String, to: String, asset: Asset },
    BatchTransfer { from: String, to: String, assets: Vec<Asset> },
    SetApproval { operator: String, scope: ApprovalScope, approved: bool },
    Fractionalize { patent: NftId, shares: u64 },
    Defractionalize { patent: NftId },
    SetPaymentClass { class_id: u64 },
    CreateListing { patent: NftId, mode: ListingMode, price: u64 },
    CancelListing { listing_id: u64 },
    RequestLicense { listing_id: u64, nda_hash: Digest, signature: Signature },
    RequestPurchase { listing_id: u64, nda_hash: Digest, signature: Signature },
    ApproveAndSettle { agreement_id: u64, signature: Signature },
    DistributeRoyalties { agreement_id: u64 },
    CompoundPortfolio { patents: Vec<NftId>, metadata_cid: ContentId },
}

fn put_cid(enc: &mut Encoder, cid: Option<&ContentId>) {
    enc.option(cid, |e, c| {
        e.value(c);
    });
}

impl Op {
    pub fn kind(&self) -> TxKind {
        match self {
            Op::RegisterIdentity { .. } | Op::RegisterAuthority { .. } | Op::AdmitValidator { .. } => {
                TxKind::IdentityReg
            }
            Op::RecordExistence { .. } => TxKind::PoERecord,
            Op::SubmitPatent { .. } | Op::CastVerdict { .. } | Op::FinalizeSubmission { .. } => {
                TxKind::PatentSubmission
            }
            Op::CreateClass { .. }
            | Op::MintNft { .. }
            | Op::MintFt { .. }
            | Op::Transfer { .. }
            | Op::BatchTransfer { .. }
            | Op::SetApproval { .. }
            | Op::Fractionalize { .. }
            | Op::Defractionalize { .. } => TxKind::TokenOp,
            _ => TxKind::MarketOp,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::RegisterIdentity { .. } => "register-identity",
            Op::RegisterAuthority { .. } => "register-authority",
            Op::AdmitValidator { .. } => "admit-validator",
            Op::RecordExistence { .. } => "record-existence",
            Op::SubmitPatent { .. } => "submit-patent",
            Op::CastVerdict { .. } => "cast-verdict",
            Op::FinalizeSubmission { .. } => "finalize-submission",
            Op::CreateClass { .. } => "create-class",
            Op::MintNft { .. } => "mint-nft",
            Op::MintFt { .. } => "mint-ft",
            Op::Transfer { .. } => "transfer",
            Op::BatchTransfer { .. } => "batch-transfer",
            Op::SetApproval { .. } => "set-approval",
            Op::Fractionalize { .. } => "fractionalize",
            Op::Defractionalize { .. } => "defractionalize",
            Op::SetPaymentClass { .. } => "set-payment-class",
            Op::CreateListing { .. } => "create-listing",
            Op::CancelListing { .. } => "cancel-listing",
            Op::RequestLicense { .. } => "request-license",
            Op::RequestPurchase { .. } => "request-purchase",
            Op::ApproveAndSettle { .. } => "approve-and-settle",
            Op::DistributeRoyalties { .. } => "distribute-royalties",
            Op::CompoundPortfolio { .. } => "compound-portfolio",
        }
    }
}

impl Canonical for Op {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Op::RegisterIdentity { public_key } => {
                enc.u8(0).value(public_key);
            }
            Op::RegisterAuthority { name, public_key } => {
                enc.u8(1).str(name).value(public_key);
            }
            Op::AdmitValidator { certificate } => {
                enc.u8(2).value(certificate);
            }
            Op::RecordExistence { chain, doc_hash } => {
                enc.u8(10)
                    .option(chain.as_ref(), |e, c| {
                        e.u64(*c);
                    })
                    .value(doc_hash);
            }
            Op::SubmitPatent { doc_cid, poe_chain, supersedes } => {
                enc.u8(20).value(doc_cid);
                enc.option(poe_chain.as_ref(), |e, c| {
                    e.u64(*c);
                });
                enc.option(supersedes.as_ref(), |e, s| {
                    e.u64(*s);
                });
            }
            Op::CastVerdict { verdict } => {
                enc.u8(21).value(verdict);
            }
            Op::FinalizeSubmission { submission_id } => {
                enc.u8(22).u64(*submission_id);
            }
            Op::CreateClass { symbol, fungibility, metadata_cid } => {
                enc.u8(30).str(symbol).value(fungibility);
                put_cid(enc, metadata_cid.as_ref());
            }
            Op::MintNft { class_id, metadata_cid } => {
                enc.u8(31).u64(*class_id);
                put_cid(enc, metadata_cid.as_ref());
            }
            Op::MintFt { class_id, amount } => {
                enc.u8(32).u64(*class_id).u64(*amount);
            }
            Op::Transfer { from, to, asset } => {
                enc.u8(33).str(from).str(to).value(asset);
            }
            Op::BatchTransfer { from, to, assets } => {
                enc.u8(34).str(from).str(to).list(assets);
            }
            Op::SetApproval { operator, scope, approved } => {
                enc.u8(35).str(operator).value(scope).bool(*approved);
            }
            Op::Fractionalize { patent, shares } => {
                enc.u8(36).value(patent).u64(*shares);
            }
            Op::Defractionalize { patent } => {
                enc.u8(37).value(patent);
            }
            Op::SetPaymentClass { class_id } => {
                enc.u8(40).u64(*class_id);
            }
            Op::CreateListing { patent, mode, price } => {
                enc.u8(41).value(patent).value(mode).u64(*price);
            }
            Op::CancelListing { listing_id } => {
                enc.u8(42).u64(*listing_id);
            }
            Op::RequestLicense { listing_id, nda_hash, signature } => {
                enc.u8(43).u64(*listing_id).value(nda_hash).value(signature);
            }
            Op::RequestPurchase { listing_id, nda_hash, signature } => {
                enc.u8(44).u64(*listing_id).value(nda_hash).value(signature);
            }
            Op::ApproveAndSettle { agreement_id, signature } => {
                enc.u8(45).u64(*agreement_id).value(signature);
            }
            Op::DistributeRoyalties { agreement_id } => {
                enc.u8(46).u64(*agreement_id);
            }
            Op::CompoundPortfolio { patents, metadata_cid } => {
                enc.u8(47).list(patents).value(metadata_cid);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        let op = match dec.u8()? {
            0 => Op::RegisterIdentity { public_key: dec.value()? },
            1 => Op::RegisterAuthority {
                name: dec.string()?,
                public_key: dec.value()?,
            },
            2 => Op::AdmitValidator { certificate: dec.value()? },
            10 => Op::RecordExistence {
                chain: dec.option(|d| d.u64())?,
                doc_hash: dec.value()?,
            },
            20 => Op::SubmitPatent {
                doc_cid: dec.value()?,
                poe_chain: dec.option(|d| d.u64())?,
                supersedes: dec.option(|d| d.u64())?,
            },
            21 => Op::CastVerdict { verdict: dec.value()? },
            22 => Op::FinalizeSubmission { submission_id: dec.u64()? },
            30 => Op::CreateClass {
                symbol: dec.string()?,
                fungibility: dec.value()?,
                metadata_cid: dec.option(|d| d.value())?,
            },
            31 => Op::MintNft {
                class_id: dec.u64()?,
                metadata_cid: dec.option(|d| d.value())?,
            },
            32 => Op::MintFt {
                class_id: dec.u64()?,
                amount: dec.u64()?,
            },
            33 => Op::Transfer {
                from: dec.string()?,
                to: dec.string()?,
                asset: dec.value()?,
            },
            34 => Op::BatchTransfer {
                from: dec.string()?,
                to: dec.string()?,
                assets: dec.list()?,
            },
            35 => Op::SetApproval {
                operator: dec.string()?,
                scope: dec.value()?,
                approved: dec.bool()?,
            },
            36 => Op::Fractionalize {
                patent: dec.value()?,
                shares: dec.u64()?,
            },
            37 => Op::Defractionalize { patent: dec.value()? },
            40 => Op::SetPaymentClass { class_id: dec.u64()? },
            41 => Op::CreateListing {
                patent: dec.value()?,
                mode: dec.value()?,
                price: dec.u64()?,
            },
            42 => Op::CancelListing { listing_id: dec.u64()? },
            43 => Op::RequestLicense {
                listing_id: dec.u64()?,
                nda_hash: dec.value()?,
                signature: dec.value()?,
            },
            44 => Op::RequestPurchase {
                listing_id: dec.u64()?,
                nda_hash: dec.value()?,
                signature: dec.value()?,
            },
            45 => Op::ApproveAndSettle {
                agreement_id: dec.u64()?,
                signature: dec.value()?,
            },
            46 => Op::DistributeRoyalties { agreement_id: dec.u64()? },
            47 => Op::CompoundPortfolio {
                patents: dec.list()?,
                metadata_cid: dec.value()?,
            },
            tag => return Err(CodecError::BadTag { what: "operation", tag }),
        };
        Ok(op)
    }
}

/// A signed request to change ledger state. The payload is the canonical
/// pair `(sequence, op)`; the sequence number must equal the count of earlier
/// transactions by the same author, which makes every transaction single-use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub kind: TxKind,
    pub payload: Vec<u8>,
    pub author: String,
    pub author_signature: Signature,
}

impl Transaction {
    pub fn signed_message(kind: TxKind, payload: &[u8]) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.value(&kind).bytes(payload);
        enc.finish()
    }

    pub fn new(key_pair: &KeyPair, author: &str, sequence: u64, op: &Op) -> Self {
        let mut enc = Encoder::new();
        enc.u64(sequence).value(op);
        let payload = enc.finish();
        let kind = op.kind();
        let author_signature = key_pair.sign(&Self::signed_message(kind, &payload));
        Self {
            kind,
            payload,
            author: author.to_owned(),
            author_signature,
        }
    }

    pub fn decode_payload(&self) -> Result<(u64, Op), CodecError> {
        let mut dec = Decoder::new(&self.payload);
        let sequence = dec.u64()?;
        let op = dec.value()?;
        dec.finish()?;
        Ok((sequence, op))
    }

    pub fn verify_signature(&self, key: &PublicKey) -> bool {
        verify(key, &Self::signed_message(self.kind, &self.payload), &self.author_signature)
    }
}

impl Canonical for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        enc.value(&self.kind)
            .bytes(&self.payload)
            .str(&self.author)
            .value(&self.author_signature);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            kind: dec.value()?,
            payload: dec.bytes()?.to_vec(),
            author: dec.string()?,
            author_signature: dec.value()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sha256;
    use crate::ledger::examination::{Checks, Decision};

    fn sample_ops() -> Vec<Op> {
        let kp = KeyPair::derive(1, "x");
        let cid = crate::content_store::content_id_of(b"doc");
        vec![
            Op::RegisterIdentity { public_key: kp.public_key() },
            Op::RecordExistence { chain: Some(2), doc_hash: sha256(b"d") },
            Op::SubmitPatent { doc_cid: cid.clone(), poe_chain: None, supersedes: Some(1) },
            Op::CastVerdict {
                verdict: Verdict::signed(&kp, "x", 1, Checks::PASS, Decision::Grant, false, "ok"),
            },
            Op::CreateClass { symbol: "PAY".into(), fungibility: Fungibility::Fungible, metadata_cid: None },
            Op::BatchTransfer {
                from: "a".into(),
                to: "b".into(),
                assets: vec![Asset::Nft(NftId::new(1, 1)), Asset::Fungible { class_id: 2, amount: 5 }],
            },
            Op::SetApproval { operator: "o".into(), scope: ApprovalScope::AllClasses, approved: true },
            Op::CreateListing { patent: NftId::new(3, 1), mode: ListingMode::License, price: 500 },
            Op::RequestLicense { listing_id: 1, nda_hash: sha256(b"nda"), signature: kp.sign(b"t") },
            Op::CompoundPortfolio { patents: vec![NftId::new(3, 1), NftId::new(3, 2)], metadata_cid: cid },
        ]
    }

    #[test]
    fn ops_round_trip() {
        for op in sample_ops() {
            let bytes = op.to_canonical_bytes();
            assert_eq!(Op::from_canonical_bytes(&bytes).unwrap(), op, "{}", op.name());
        }
    }

    #[test]
    fn transaction_signature_covers_kind_and_payload() {
        let kp = KeyPair::derive(1, "author");
        let op = Op::MintFt { class_id: 1, amount: 10 };
        let tx = Transaction::new(&kp, "author", 0, &op);
        assert!(tx.verify_signature(&kp.public_key()));
        assert_eq!(tx.decode_payload().unwrap(), (0, op));
        let mut other_kind = tx.clone();
        other_kind.kind = TxKind::MarketOp;
        assert!(!other_kind.verify_signature(&kp.public_key()));
        let mut other_payload = tx.clone();
        other_payload.payload[7] ^= 1;
        assert!(!other_payload.verify_signature(&kp.public_key()));
        let back = Transaction::from_canonical_bytes(&tx.to_canonical_bytes()).unwrap();
        assert_eq!(back, tx);
    }
}
