//! Patent marketplace: fixed-price sale and license listings, dual-signed NDA
//! agreements, settlement in the designated payment class, royalty splitting
//! over fractional share holders, and compounded portfolios.
//!
//! The book holds no tokens of its own. Sale listings escrow the patent by
//! freezing it in place; license revenue on a fractionalized patent is parked
//! in [`ROYALTY_POOL`] until distributed.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::content_store::{content_id_of, ContentId};
use crate::crypto::{verify, Digest, KeyPair, PublicKey, Signature};
use crate::identity::IdentityRegistry;
use crate::token::{Lock, NftId, TokenError, TokenInstance, TokenRegistry};

/// Holding account for license fees awaiting distribution.
pub const ROYALTY_POOL: &str = "@royalty-pool";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("no identity transaction for {0}")]
    UnknownIdentity(String),
    #[error("no payment class has been designated")]
    NoPaymentClass,
    #[error("payment class is already designated")]
    PaymentClassFixed,
    #[error("{0} does not own the patent")]
    NotOwner(String),
    #[error("patent {0} is frozen")]
    FrozenAsset(NftId),
    #[error("patent {0} already has an active listing")]
    DuplicateListing(NftId),
    #[error("unknown listing {0}")]
    UnknownListing(u64),
    #[error("listing {0} is not active")]
    InactiveListing(u64),
    #[error("listing {0} has the wrong mode for this request")]
    WrongMode(u64),
    #[error("unknown agreement {0}")]
    UnknownAgreement(u64),
    #[error("{0} is not the seller of this listing")]
    NotSeller(String),
    #[error("agreement {0} is already settled")]
    AlreadySettled(u64),
    #[error("agreement {0} is not settled")]
    NotSettled(u64),
    #[error("royalties for agreement {0} were already distributed")]
    AlreadyDistributed(u64),
    #[error("balance {available} is below the price {price}")]
    InsufficientBalance { available: u64, price: u64 },
    #[error("signature over the agreement terms does not verify")]
    BadSignature,
    #[error("a portfolio needs at least one patent")]
    EmptyPortfolio,
    #[error("patent {0} appears twice in the portfolio")]
    DuplicateConstituent(NftId),
    #[error("portfolio metadata does not match its constituents")]
    MetadataMismatch,
    #[error(transparent)]
    Token(#[from] TokenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ListingMode {
    Sale,
    License,
}

impl ListingMode {
    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "sale" => Some(ListingMode::Sale),
            "license" => Some(ListingMode::License),
            _ => None,
        }
    }
}

impl Canonical for ListingMode {
    fn encode(&self, enc: &mut Encoder) {
        enc.u8(match self {
            ListingMode::Sale => 0,
            ListingMode::License => 1,
        });
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            0 => Ok(ListingMode::Sale),
            1 => Ok(ListingMode::License),
            tag => Err(CodecError::BadTag { what: "listing mode", tag }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Listing {
    pub listing_id: u64,
    pub patent: NftId,
    pub seller: String,
    pub mode: ListingMode,
    pub price: u64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LicenseAgreement {
    pub agreement_id: u64,
    pub listing_id: u64,
    pub consumer: String,
    pub nda_hash: Digest,
    pub consumer_signature: Signature,
    pub seller_signature: Option<Signature>,
    pub settled: bool,
    /// Amount parked in the royalty pool at settlement.
    pub pooled: u64,
    pub distributed: bool,
}

/// The terms both parties sign: listing, consumer and NDA digest.
pub fn agreement_terms(listing_id: u64, consumer: &str, nda_hash: &Digest) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.str("nda-terms").u64(listing_id).str(consumer).value(nda_hash);
    enc.finish()
}

pub fn sign_terms(key_pair: &KeyPair, listing_id: u64, consumer: &str, nda_hash: &Digest) -> Signature {
    key_pair.sign(&agreement_terms(listing_id, consumer, nda_hash))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoyaltyDistribution {
    pub agreement_id: u64,
    pub gross: u64,
    pub payouts: Vec<(String, u64)>,
}

/// Pro-rata split: each holder gets `floor(gross * shares / total)`; the
/// remaining units go one each to holders in descending share order, ties by
/// username, skipping holders whose quota was already whole. Payouts are
/// returned in the order of `holdings`.
pub fn royalty_split(gross: u64, holdings: &[(String, u64)]) -> Vec<(String, u64)> {
    let total: u128 = holdings.iter().map(|(_, s)| u128::from(*s)).sum();
    if total == 0 {
        return holdings.iter().map(|(name, _)| (name.clone(), 0)).collect();
    }
    let quota = |shares: u64| u128::from(gross) * u128::from(shares);
    let mut payouts: Vec<(String, u64)> = holdings
        .iter()
        .map(|(name, shares)| (name.clone(), (quota(*shares) / total) as u64))
        .collect();
    let assigned: u64 = payouts.iter().map(|(_, p)| p).sum();
    let mut order: Vec<usize> = (0..holdings.len())
        .filter(|&i| quota(holdings[i].1) % total != 0)
        .collect();
    order.sort_by(|&a, &b| {
        holdings[b]
            .1
            .cmp(&holdings[a].1)
            .then_with(|| holdings[a].0.cmp(&holdings[b].0))
    });
    for &index in order.iter().take((gross - assigned) as usize) {
        payouts[index].1 += 1;
    }
    payouts
}

/// Canonical metadata body of a compounded portfolio.
pub fn portfolio_manifest(patents: &[NftId]) -> Vec<u8> {
    let mut text = String::from("patent-portfolio\n");
    for id in patents {
        text.push_str(&format!("{id}\n"));
    }
    text.into_bytes()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MarketBook {
    payment_class: Option<u64>,
    portfolio_class: Option<u64>,
    listings: BTreeMap<u64, Listing>,
    agreements: BTreeMap<u64, LicenseAgreement>,
    distributions: BTreeMap<u64, RoyaltyDistribution>,
    portfolios: BTreeMap<NftId, Vec<NftId>>,
}

impl MarketBook {
    pub fn payment_class(&self) -> Option<u64> {
        self.payment_class
    }

    pub fn listing(&self, id: u64) -> Option<&Listing> {
        self.listings.get(&id)
    }

    pub fn listings(&self) -> impl Iterator<Item = &Listing> {
        self.listings.values()
    }

    pub fn agreement(&self, id: u64) -> Option<&LicenseAgreement> {
        self.agreements.get(&id)
    }

    pub fn agreements(&self) -> impl Iterator<Item = &LicenseAgreement> {
        self.agreements.values()
    }

    pub fn distribution(&self, agreement_id: u64) -> Option<&RoyaltyDistribution> {
        self.distributions.get(&agreement_id)
    }

    pub fn distributions(&self) -> impl Iterator<Item = &RoyaltyDistribution> {
        self.distributions.values()
    }

    pub fn portfolios(&self) -> impl Iterator<Item = (NftId, &[NftId])> {
        self.portfolios.iter().map(|(id, members)| (*id, members.as_slice()))
    }

    pub fn portfolio(&self, id: NftId) -> Option<&[NftId]> {
        self.portfolios.get(&id).map(Vec::as_slice)
    }

    pub fn set_payment_class(&mut self, tokens: &TokenRegistry, actor: &str, class_id: u64) -> Result<(), MarketError> {
        if self.payment_class.is_some() {
            return Err(MarketError::PaymentClassFixed);
        }
        let class = tokens.class(class_id).ok_or(TokenError::UnknownClass(class_id))?;
        if !class.fungibility.has_balances() {
            return Err(TokenError::WrongFungibility(class_id).into());
        }
        if class.issuer != actor {
            return Err(TokenError::NotIssuer(class_id).into());
        }
        self.payment_class = Some(class_id);
        Ok(())
    }

    fn next_id<V>(map: &BTreeMap<u64, V>) -> u64 {
        map.last_key_value().map_or(1, |(k, _)| k + 1)
    }

    fn active_listing_for(&self, patent: NftId) -> Option<&Listing> {
        self.listings.values().find(|l| l.active && l.patent == patent)
    }

    pub fn create_listing(
        &mut self,
        tokens: &mut TokenRegistry,
        seller: &str,
        patent: NftId,
        mode: ListingMode,
        price: u64,
    ) -> Result<Listing, MarketError> {
        if self.payment_class.is_none() {
            return Err(MarketError::NoPaymentClass);
        }
        let instance = tokens.instance(patent).ok_or(TokenError::UnknownInstance(patent))?;
        if instance.owner != seller {
            return Err(MarketError::NotOwner(seller.to_owned()));
        }
        if self.active_listing_for(patent).is_some() {
            return Err(MarketError::DuplicateListing(patent));
        }
        if mode == ListingMode::Sale && instance.frozen() {
            return Err(MarketError::FrozenAsset(patent));
        }
        let listing_id = Self::next_id(&self.listings);
        if mode == ListingMode::Sale {
            tokens.lock(patent, Lock::Escrowed { listing_id })?;
        }
        let listing = Listing {
            listing_id,
            patent,
            seller: seller.to_owned(),
            mode,
            price,
            active: true,
        };
        self.listings.insert(listing_id, listing.clone());
        Ok(listing)
    }

    /// Withdraws an active listing; a sale escrow returns to the seller.
    pub fn cancel_listing(&mut self, tokens: &mut TokenRegistry, seller: &str, listing_id: u64) -> Result<(), MarketError> {
        let listing = self
            .listings
            .get_mut(&listing_id)
            .ok_or(MarketError::UnknownListing(listing_id))?;
        if listing.seller != seller {
            return Err(MarketError::NotSeller(seller.to_owned()));
        }
        if !listing.active {
            return Err(MarketError::InactiveListing(listing_id));
        }
        listing.active = false;
        if listing.mode == ListingMode::Sale {
            tokens.unlock(listing.patent);
        }
        Ok(())
    }

    fn open_agreement(
        &mut self,
        identities: &IdentityRegistry,
        consumer: &str,
        listing_id: u64,
        wanted: ListingMode,
        nda_hash: Digest,
        consumer_signature: Signature,
    ) -> Result<LicenseAgreement, MarketError> {
        let consumer_key = identities
            .key_of(consumer)
            .ok_or_else(|| MarketError::UnknownIdentity(consumer.to_owned()))?;
        let listing = self
            .listings
            .get(&listing_id)
            .ok_or(MarketError::UnknownListing(listing_id))?;
        if !listing.active {
            return Err(MarketError::InactiveListing(listing_id));
        }
        if listing.mode != wanted {
            return Err(MarketError::WrongMode(listing_id));
        }
        if !verify(&consumer_key, &agreement_terms(listing_id, consumer, &nda_hash), &consumer_signature) {
            return Err(MarketError::BadSignature);
        }
        let agreement = LicenseAgreement {
            agreement_id: Self::next_id(&self.agreements),
            listing_id,
            consumer: consumer.to_owned(),
            nda_hash,
            consumer_signature,
            seller_signature: None,
            settled: false,
            pooled: 0,
            distributed: false,
        };
        self.agreements.insert(agreement.agreement_id, agreement.clone());
        Ok(agreement)
    }

    /// A consumer's signed request for a license; awaits the seller.
    pub fn request_license(
        &mut self,
        identities: &IdentityRegistry,
        consumer: &str,
        listing_id: u64,
        nda_hash: Digest,
        consumer_signature: Signature,
    ) -> Result<LicenseAgreement, MarketError> {
        self.open_agreement(identities, consumer, listing_id, ListingMode::License, nda_hash, consumer_signature)
    }

    /// Same as [`Self::request_license`] for sale listings.
    pub fn request_purchase(
        &mut self,
        identities: &IdentityRegistry,
        consumer: &str,
        listing_id: u64,
        nda_hash: Digest,
        consumer_signature: Signature,
    ) -> Result<LicenseAgreement, MarketError> {
        self.open_agreement(identities, consumer, listing_id, ListingMode::Sale, nda_hash, consumer_signature)
    }

    /// Seller co-signs and payment settles in one step. Any failure leaves
    /// tokens and the book untouched.
    pub fn approve_and_settle(
        &mut self,
        tokens: &mut TokenRegistry,
        identities: &IdentityRegistry,
        seller: &str,
        agreement_id: u64,
        seller_signature: Signature,
    ) -> Result<LicenseAgreement, MarketError> {
        let payment_class = self.payment_class.ok_or(MarketError::NoPaymentClass)?;
        let agreement = self
            .agreements
            .get(&agreement_id)
            .ok_or(MarketError::UnknownAgreement(agreement_id))?;
        let listing = &self.listings[&agreement.listing_id];
        if listing.seller != seller {
            return Err(MarketError::NotSeller(seller.to_owned()));
        }
        if agreement.settled {
            return Err(MarketError::AlreadySettled(agreement_id));
        }
        if !listing.active {
            return Err(MarketError::InactiveListing(listing.listing_id));
        }
        if tokens.owner_of(listing.patent) != Some(seller) {
            return Err(MarketError::NotOwner(seller.to_owned()));
        }
        let seller_key: PublicKey = identities
            .key_of(seller)
            .ok_or_else(|| MarketError::UnknownIdentity(seller.to_owned()))?;
        let terms = agreement_terms(agreement.listing_id, &agreement.consumer, &agreement.nda_hash);
        if !verify(&seller_key, &terms, &seller_signature) {
            return Err(MarketError::BadSignature);
        }
        let available = tokens.balance(payment_class, &agreement.consumer);
        if available < listing.price {
            return Err(MarketError::InsufficientBalance {
                available,
                price: listing.price,
            });
        }

        let fractionalized = tokens.fractionalization(listing.patent).is_some();
        let payee = if fractionalized { ROYALTY_POOL } else { seller };
        tokens.move_balance(payment_class, &agreement.consumer, payee, listing.price)?;
        let (price, mode, patent, listing_id) = (listing.price, listing.mode, listing.patent, listing.listing_id);
        let consumer = agreement.consumer.clone();
        if mode == ListingMode::Sale {
            tokens.unlock(patent);
            tokens.reassign(patent, &consumer);
            self.listings.get_mut(&listing_id).expect("exists").active = false;
        }
        let agreement = self.agreements.get_mut(&agreement_id).expect("exists");
        agreement.seller_signature = Some(seller_signature);
        agreement.settled = true;
        agreement.pooled = if fractionalized { price } else { 0 };
        Ok(agreement.clone())
    }

    /// Pays out a settled agreement. Pooled revenue is split over the share
    /// holders of the patent at this moment; revenue paid straight to the
    /// seller is reported as a single payout without moving funds again.
    pub fn distribute_royalties(
        &mut self,
        tokens: &mut TokenRegistry,
        agreement_id: u64,
    ) -> Result<RoyaltyDistribution, MarketError> {
        let agreement = self
            .agreements
            .get(&agreement_id)
            .ok_or(MarketError::UnknownAgreement(agreement_id))?;
        if !agreement.settled {
            return Err(MarketError::NotSettled(agreement_id));
        }
        if agreement.distributed {
            return Err(MarketError::AlreadyDistributed(agreement_id));
        }
        let listing = &self.listings[&agreement.listing_id];
        let gross = listing.price;
        let payouts = if agreement.pooled == 0 {
            vec![(listing.seller.clone(), gross)]
        } else {
            let payment_class = self.payment_class.ok_or(MarketError::NoPaymentClass)?;
            let payouts = match tokens.fractionalization(listing.patent) {
                Some(record) => royalty_split(gross, &tokens.holders(record.shares_class_id)),
                None => {
                    let owner = tokens.owner_of(listing.patent).unwrap_or(&listing.seller).to_owned();
                    vec![(owner, gross)]
                }
            };
            for (recipient, amount) in &payouts {
                tokens.move_balance(payment_class, ROYALTY_POOL, recipient, *amount)?;
            }
            payouts
        };
        let distribution = RoyaltyDistribution {
            agreement_id,
            gross,
            payouts,
        };
        self.agreements.get_mut(&agreement_id).expect("exists").distributed = true;
        self.distributions.insert(agreement_id, distribution.clone());
        Ok(distribution)
    }

    /// Freezes the constituents and mints a portfolio token whose metadata
    /// object lists them.
    pub fn compound_portfolio(
        &mut self,
        tokens: &mut TokenRegistry,
        owner: &str,
        patents: &[NftId],
        metadata_cid: &ContentId,
    ) -> Result<TokenInstance, MarketError> {
        if patents.is_empty() {
            return Err(MarketError::EmptyPortfolio);
        }
        let mut seen = BTreeSet::new();
        for id in patents {
            if !seen.insert(*id) {
                return Err(MarketError::DuplicateConstituent(*id));
            }
            let instance = tokens.instance(*id).ok_or(TokenError::UnknownInstance(*id))?;
            if instance.owner != owner {
                return Err(MarketError::NotOwner(owner.to_owned()));
            }
            if instance.frozen() {
                return Err(MarketError::FrozenAsset(*id));
            }
        }
        if content_id_of(&portfolio_manifest(patents)) != *metadata_cid {
            return Err(MarketError::MetadataMismatch);
        }
        let class_id = *self
            .portfolio_class
            .get_or_insert_with(|| tokens.create_system_class("PORTFOLIO"));
        let portfolio = tokens.issue_instance(class_id, owner, Some(metadata_cid.clone()));
        for id in patents {
            tokens.lock(*id, Lock::Bundled { portfolio: portfolio.id() })?;
        }
        self.portfolios.insert(portfolio.id(), patents.to_vec());
        Ok(portfolio)
    }

    /// Whether `user` may read the document behind `patent`: its owner, a
    /// consumer holding a settled agreement on it, or a licensee of a
    /// portfolio bundling it.
    pub fn has_access(&self, tokens: &TokenRegistry, user: &str, patent: NftId) -> bool {
        if tokens.owner_of(patent) == Some(user) {
            return true;
        }
        let licensed = |target: NftId| {
            self.agreements.values().any(|a| {
                a.settled && a.consumer == user && self.listings[&a.listing_id].patent == target
            })
        };
        if licensed(patent) {
            return true;
        }
        self.portfolios
            .iter()
            .any(|(portfolio, members)| members.contains(&patent) && licensed(*portfolio))
    }
}
