use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::codec::{Canonical, CodecError, Decoder, Encoder};
use crate::content_store::ContentId;
use crate::identity::IdentityRegistry;

use super::profile::{Feature, Standard};

/// Owner of ledger-controlled classes (patent grants, share classes,
/// portfolios). Usernames always start with `u`, so this never collides.
pub const SYSTEM_ACCOUNT: &str = "@ledger";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("no identity transaction for {0}")]
    UnknownIdentity(String),
    #[error("{0} is not supported by the {1} profile")]
    ProfileUnsupported(Feature, Standard),
    #[error("unknown token class {0}")]
    UnknownClass(u64),
    #[error("unknown token {0}")]
    UnknownInstance(NftId),
    #[error("class {0} has the wrong fungibility for this operation")]
    WrongFungibility(u64),
    #[error("only the class issuer may mint into class {0}")]
    NotIssuer(u64),
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("symbol must not be empty")]
    EmptySymbol,
    #[error("{0} does not own the asset")]
    NotOwner(String),
    #[error("{actor} is not an approved operator for {owner}")]
    NotApprovedOperator { owner: String, actor: String },
    #[error("balance {available} is below {requested}")]
    InsufficientBalance { available: u64, requested: u64 },
    #[error("token {0} is frozen")]
    FrozenAsset(NftId),
    #[error("token {0} is already fractionalized")]
    AlreadyFractionalized(NftId),
    #[error("token {0} is not fractionalized")]
    NotFractionalized(NftId),
    #[error("a fractionalization needs at least two shares")]
    TooFewShares,
    #[error("holder owns {held} of {total} shares")]
    IncompleteShares { held: u64, total: u64 },
    #[error("metadata of {0} is write-once")]
    MetadataImmutable(NftId),
    #[error("an owner cannot approve itself")]
    SelfApproval,
    #[error("batch element {index} failed: {source}")]
    BatchFailed {
        index: usize,
        #[source]
        source: Box<TokenError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Fungibility {
    Fungible,
    NonFungible,
    SemiFungible,
}

impl Fungibility {
    fn tag(self) -> u8 {
        match self {
            Fungibility::Fungible => 0,
            Fungibility::NonFungible => 1,
            Fungibility::SemiFungible => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, CodecError> {
        match tag {
            0 => Ok(Fungibility::Fungible),
            1 => Ok(Fungibility::NonFungible),
            2 => Ok(Fungibility::SemiFungible),
            tag => Err(CodecError::BadTag { what: "fungibility", tag }),
        }
    }

    pub fn has_balances(self) -> bool {
        self != Fungibility::NonFungible
    }

    pub fn has_instances(self) -> bool {
        self != Fungibility::Fungible
    }
}

impl Canonical for Fungibility {
    fn encode(&self, enc: &mut Encoder) {
        enc.u8(self.tag());
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Fungibility::from_tag(dec.u8()?)
    }
}

/// `(class_id, instance_id)`. Instance ids start at 1; 0 names the fungible
/// pool of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NftId {
    pub class_id: u64,
    pub instance_id: u64,
}

impl NftId {
    pub fn new(class_id: u64, instance_id: u64) -> Self {
        Self { class_id, instance_id }
    }
}

impl fmt::Display for NftId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.class_id, self.instance_id)
    }
}

impl Serialize for NftId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Canonical for NftId {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.class_id).u64(self.instance_id);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        Ok(Self::new(dec.u64()?, dec.u64()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Asset {
    Nft(NftId),
    Fungible { class_id: u64, amount: u64 },
}

impl Asset {
    pub fn class_id(&self) -> u64 {
        match self {
            Asset::Nft(id) => id.class_id,
            Asset::Fungible { class_id, .. } => *class_id,
        }
    }
}

impl Canonical for Asset {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            Asset::Nft(id) => {
                enc.u8(0).value(id);
            }
            Asset::Fungible { class_id, amount } => {
                enc.u8(1).u64(*class_id).u64(*amount);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            0 => Ok(Asset::Nft(dec.value()?)),
            1 => Ok(Asset::Fungible {
                class_id: dec.u64()?,
                amount: dec.u64()?,
            }),
            tag => Err(CodecError::BadTag { what: "asset", tag }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ApprovalScope {
    Class(u64),
    AllClasses,
}

impl Canonical for ApprovalScope {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            ApprovalScope::Class(id) => {
                enc.u8(0).u64(*id);
            }
            ApprovalScope::AllClasses => {
                enc.u8(1);
            }
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, CodecError> {
        match dec.u8()? {
            0 => Ok(ApprovalScope::Class(dec.u64()?)),
            1 => Ok(ApprovalScope::AllClasses),
            tag => Err(CodecError::BadTag { what: "approval scope", tag }),
        }
    }
}

/// Why an instance cannot move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lock {
    Fractionalized { shares_class_id: u64 },
    Escrowed { listing_id: u64 },
    Bundled { portfolio: NftId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenClass {
    pub class_id: u64,
    pub fungibility: Fungibility,
    pub symbol: String,
    pub metadata_cid: Option<ContentId>,
    pub issuer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenInstance {
    pub class_id: u64,
    pub instance_id: u64,
    pub owner: String,
    pub metadata_cid: Option<ContentId>,
    pub lock: Option<Lock>,
}

impl TokenInstance {
    pub fn id(&self) -> NftId {
        NftId::new(self.class_id, self.instance_id)
    }

    pub fn frozen(&self) -> bool {
        self.lock.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalanceEntry {
    pub class_id: u64,
    pub owner: String,
    pub amount: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FractionalizationRecord {
    pub parent: NftId,
    pub shares_class_id: u64,
    pub total_shares: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenRegistry {
    profile: Standard,
    classes: BTreeMap<u64, TokenClass>,
    instances: BTreeMap<NftId, TokenInstance>,
    balances: BTreeMap<u64, BTreeMap<String, u64>>,
    supply: BTreeMap<u64, u64>,
    approvals: BTreeSet<(String, String, ApprovalScope)>,
    fractions: BTreeMap<NftId, FractionalizationRecord>,
    next_class_id: u64,
}

impl Default for TokenRegistry {
    fn default() -> Self {
        Self::new(Standard::Algorand)
    }
}

impl TokenRegistry {
    pub fn new(profile: Standard) -> Self {
        Self {
            profile,
            classes: BTreeMap::new(),
            instances: BTreeMap::new(),
            balances: BTreeMap::new(),
            supply: BTreeMap::new(),
            approvals: BTreeSet::new(),
            fractions: BTreeMap::new(),
            next_class_id: 1,
        }
    }

    pub fn profile(&self) -> Standard {
        self.profile
    }

    fn require_feature(&self, feature: Feature) -> Result<(), TokenError> {
        if self.profile.supports(feature) {
            Ok(())
        } else {
            Err(TokenError::ProfileUnsupported(feature, self.profile))
        }
    }

    // ---- queries -------------------------------------------------------

    pub fn class(&self, class_id: u64) -> Option<&TokenClass> {
        self.classes.get(&class_id)
    }

    pub fn classes(&self) -> impl Iterator<Item = &TokenClass> {
        self.classes.values()
    }

    pub fn instance(&self, id: NftId) -> Option<&TokenInstance> {
        self.instances.get(&id)
    }

    pub fn instances(&self) -> impl Iterator<Item = &TokenInstance> {
        self.instances.values()
    }

    pub fn owner_of(&self, id: NftId) -> Option<&str> {
        self.instances.get(&id).map(|i| i.owner.as_str())
    }

    pub fn balance(&self, class_id: u64, owner: &str) -> u64 {
        self.balances
            .get(&class_id)
            .and_then(|b| b.get(owner))
            .copied()
            .unwrap_or(0)
    }

    pub fn supply(&self, class_id: u64) -> u64 {
        self.supply.get(&class_id).copied().unwrap_or(0)
    }

    /// Non-zero holders of a class, in username order.
    pub fn holders(&self, class_id: u64) -> Vec<(String, u64)> {
        self.balances
            .get(&class_id)
            .map(|b| b.iter().map(|(k, v)| (k.clone(), *v)).collect())
            .unwrap_or_default()
    }

    pub fn fractionalization(&self, id: NftId) -> Option<&FractionalizationRecord> {
        self.fractions.get(&id)
    }

    pub fn is_approved(&self, owner: &str, operator: &str, class_id: u64) -> bool {
        let key = |scope| (owner.to_owned(), operator.to_owned(), scope);
        self.approvals.contains(&key(ApprovalScope::Class(class_id)))
            || self.approvals.contains(&key(ApprovalScope::AllClasses))
    }

    fn class_checked(&self, class_id: u64) -> Result<&TokenClass, TokenError> {
        self.classes.get(&class_id).ok_or(TokenError::UnknownClass(class_id))
    }

    fn instance_checked(&self, id: NftId) -> Result<&TokenInstance, TokenError> {
        self.instances.get(&id).ok_or(TokenError::UnknownInstance(id))
    }

    // ---- classes and minting ------------------------------------------

    pub fn create_class(
        &mut self,
        issuer: &str,
        symbol: &str,
        fungibility: Fungibility,
        metadata_cid: Option<ContentId>,
    ) -> Result<u64, TokenError> {
        if symbol.is_empty() {
            return Err(TokenError::EmptySymbol);
        }
        if fungibility.has_balances() {
            self.require_feature(Feature::FungibleTokens)?;
        }
        if fungibility.has_instances() {
            self.require_feature(Feature::NonFungibleTokens)?;
        }
        Ok(self.insert_class(issuer, symbol, fungibility, metadata_cid))
    }

    fn insert_class(
        &mut self,
        issuer: &str,
        symbol: &str,
        fungibility: Fungibility,
        metadata_cid: Option<ContentId>,
    ) -> u64 {
        let class_id = self.next_class_id;
        self.next_class_id += 1;
        self.classes.insert(
            class_id,
            TokenClass {
                class_id,
                fungibility,
                symbol: symbol.to_owned(),
                metadata_cid,
                issuer: issuer.to_owned(),
            },
        );
        class_id
    }

    /// Creates a non-fungible class owned by the ledger itself.
    pub(crate) fn create_system_class(&mut self, symbol: &str) -> u64 {
        self.insert_class(SYSTEM_ACCOUNT, symbol, Fungibility::NonFungible, None)
    }

    pub fn mint_nft(
        &mut self,
        identities: &IdentityRegistry,
        minter: &str,
        class_id: u64,
        metadata_cid: Option<ContentId>,
    ) -> Result<TokenInstance, TokenError> {
        if !identities.contains(minter) {
            return Err(TokenError::UnknownIdentity(minter.to_owned()));
        }
        self.require_feature(Feature::NonFungibleTokens)?;
        let class = self.class_checked(class_id)?;
        if !class.fungibility.has_instances() {
            return Err(TokenError::WrongFungibility(class_id));
        }
        if class.issuer != minter {
            return Err(TokenError::NotIssuer(class_id));
        }
        Ok(self.issue_instance(class_id, minter, metadata_cid))
    }

    /// Mints without identity or issuer checks; used for ledger-driven grants.
    pub(crate) fn issue_instance(
        &mut self,
        class_id: u64,
        owner: &str,
        metadata_cid: Option<ContentId>,
    ) -> TokenInstance {
        let instance_id = self
            .instances
            .range(NftId::new(class_id, 0)..=NftId::new(class_id, u64::MAX))
            .next_back()
            .map_or(1, |(id, _)| id.instance_id + 1);
        let instance = TokenInstance {
            class_id,
            instance_id,
            owner: owner.to_owned(),
            metadata_cid,
            lock: None,
        };
        self.instances.insert(instance.id(), instance.clone());
        instance
    }

    pub fn mint_ft(
        &mut self,
        identities: &IdentityRegistry,
        minter: &str,
        class_id: u64,
        amount: u64,
    ) -> Result<BalanceEntry, TokenError> {
        if !identities.contains(minter) {
            return Err(TokenError::UnknownIdentity(minter.to_owned()));
        }
        self.require_feature(Feature::FungibleTokens)?;
        let class = self.class_checked(class_id)?;
        if !class.fungibility.has_balances() {
            return Err(TokenError::WrongFungibility(class_id));
        }
        if class.issuer != minter {
            return Err(TokenError::NotIssuer(class_id));
        }
        if amount == 0 {
            return Err(TokenError::ZeroAmount);
        }
        self.credit(class_id, minter, amount);
        *self.supply.entry(class_id).or_default() += amount;
        Ok(BalanceEntry {
            class_id,
            owner: minter.to_owned(),
            amount: self.balance(class_id, minter),
        })
    }

    /// Write-once metadata: only an instance minted without a CID may get one.
    pub fn set_metadata(&mut self, actor: &str, id: NftId, cid: ContentId) -> Result<(), TokenError> {
        let instance = self.instances.get_mut(&id).ok_or(TokenError::UnknownInstance(id))?;
        if instance.owner != actor {
            return Err(TokenError::NotOwner(actor.to_owned()));
        }
        if instance.metadata_cid.is_some() {
            return Err(TokenError::MetadataImmutable(id));
        }
        instance.metadata_cid = Some(cid);
        Ok(())
    }

    // ---- balances ------------------------------------------------------

    fn credit(&mut self, class_id: u64, owner: &str, amount: u64) {
        *self
            .balances
            .entry(class_id)
            .or_default()
            .entry(owner.to_owned())
            .or_default() += amount;
    }

    fn debit(&mut self, class_id: u64, owner: &str, amount: u64) -> Result<(), TokenError> {
        let available = self.balance(class_id, owner);
        if available < amount {
            return Err(TokenError::InsufficientBalance {
                available,
                requested: amount,
            });
        }
        let holders = self.balances.get_mut(&class_id).expect("positive balance exists");
        if available == amount {
            holders.remove(owner);
        } else {
            *holders.get_mut(owner).expect("positive balance exists") -= amount;
        }
        Ok(())
    }

    // ---- transfers -----------------------------------------------------

    pub fn set_approval(
        &mut self,
        owner: &str,
        operator: &str,
        scope: ApprovalScope,
        approved: bool,
    ) -> Result<(), TokenError> {
        self.require_feature(Feature::Operator)?;
        if owner == operator {
            return Err(TokenError::SelfApproval);
        }
        if let ApprovalScope::Class(class_id) = scope {
            self.class_checked(class_id)?;
        }
        let key = (owner.to_owned(), operator.to_owned(), scope);
        if approved {
            self.approvals.insert(key);
        } else {
            self.approvals.remove(&key);
        }
        Ok(())
    }

    fn authorize(&self, from: &str, actor: &str, class_id: u64) -> Result<(), TokenError> {
        if actor == from {
            return Ok(());
        }
        self.require_feature(Feature::Operator)?;
        if self.is_approved(from, actor, class_id) {
            Ok(())
        } else {
            Err(TokenError::NotApprovedOperator {
                owner: from.to_owned(),
                actor: actor.to_owned(),
            })
        }
    }

    pub fn transfer(&mut self, from: &str, to: &str, asset: Asset, actor: &str) -> Result<(), TokenError> {
        match asset {
            Asset::Nft(id) => {
                let instance = self.instance_checked(id)?;
                if instance.owner != from {
                    return Err(TokenError::NotOwner(from.to_owned()));
                }
                self.authorize(from, actor, id.class_id)?;
                if instance.frozen() {
                    return Err(TokenError::FrozenAsset(id));
                }
                self.instances.get_mut(&id).expect("checked").owner = to.to_owned();
            }
            Asset::Fungible { class_id, amount } => {
                let class = self.class_checked(class_id)?;
                if !class.fungibility.has_balances() {
                    return Err(TokenError::WrongFungibility(class_id));
                }
                if amount == 0 {
                    return Err(TokenError::ZeroAmount);
                }
                self.authorize(from, actor, class_id)?;
                self.debit(class_id, from, amount)?;
                self.credit(class_id, to, amount);
            }
        }
        Ok(())
    }

    /// All-or-nothing: on failure the registry is left exactly as before and
    /// the index of the first failing element is reported.
    pub fn batch_transfer(
        &mut self,
        from: &str,
        to: &str,
        assets: &[Asset],
        actor: &str,
    ) -> Result<(), TokenError> {
        self.require_feature(Feature::BatchTransfer)?;
        if assets.is_empty() {
            return Ok(());
        }
        let mut scratch = self.clone();
        for (index, asset) in assets.iter().enumerate() {
            scratch
                .transfer(from, to, *asset, actor)
                .map_err(|source| TokenError::BatchFailed {
                    index,
                    source: Box::new(source),
                })?;
        }
        *self = scratch;
        Ok(())
    }

    // ---- locks ---------------------------------------------------------

    pub(crate) fn lock(&mut self, id: NftId, lock: Lock) -> Result<(), TokenError> {
        let instance = self.instances.get_mut(&id).ok_or(TokenError::UnknownInstance(id))?;
        if instance.lock.is_some() {
            return Err(TokenError::FrozenAsset(id));
        }
        instance.lock = Some(lock);
        Ok(())
    }

    pub(crate) fn unlock(&mut self, id: NftId) {
        if let Some(instance) = self.instances.get_mut(&id) {
            instance.lock = None;
        }
    }

    /// Moves an instance regardless of locks; callers own the state machine
    /// that justifies it (escrow settlement).
    pub(crate) fn reassign(&mut self, id: NftId, to: &str) {
        if let Some(instance) = self.instances.get_mut(&id) {
            instance.owner = to.to_owned();
        }
    }

    pub(crate) fn move_balance(&mut self, class_id: u64, from: &str, to: &str, amount: u64) -> Result<(), TokenError> {
        if amount == 0 {
            return Ok(());
        }
        self.debit(class_id, from, amount)?;
        self.credit(class_id, to, amount);
        Ok(())
    }

    // ---- fractionalization ---------------------------------------------

    pub fn fractionalize(
        &mut self,
        owner: &str,
        id: NftId,
        total_shares: u64,
    ) -> Result<FractionalizationRecord, TokenError> {
        self.require_feature(Feature::Fractionalization)?;
        let instance = self.instance_checked(id)?;
        if instance.owner != owner {
            return Err(TokenError::NotOwner(owner.to_owned()));
        }
        if self.fractions.contains_key(&id) {
            return Err(TokenError::AlreadyFractionalized(id));
        }
        if instance.frozen() {
            return Err(TokenError::FrozenAsset(id));
        }
        if total_shares < 2 {
            return Err(TokenError::TooFewShares);
        }
        let symbol = format!("{}#{}-SHARES", self.classes[&id.class_id].symbol, id.instance_id);
        let shares_class_id = self.insert_class(SYSTEM_ACCOUNT, &symbol, Fungibility::Fungible, None);
        self.credit(shares_class_id, owner, total_shares);
        self.supply.insert(shares_class_id, total_shares);
        self.lock(id, Lock::Fractionalized { shares_class_id })?;
        let record = FractionalizationRecord {
            parent: id,
            shares_class_id,
            total_shares,
        };
        self.fractions.insert(id, record.clone());
        Ok(record)
    }

    /// Retires the share class and hands the parent back, unfrozen, to the
    /// holder of every share.
    pub fn defractionalize(&mut self, holder: &str, id: NftId) -> Result<TokenInstance, TokenError> {
        let record = self
            .fractions
            .get(&id)
            .cloned()
            .ok_or(TokenError::NotFractionalized(id))?;
        let held = self.balance(record.shares_class_id, holder);
        if held != record.total_shares {
            return Err(TokenError::IncompleteShares {
                held,
                total: record.total_shares,
            });
        }
        self.balances.remove(&record.shares_class_id);
        self.supply.remove(&record.shares_class_id);
        self.classes.remove(&record.shares_class_id);
        self.approvals
            .retain(|(_, _, scope)| *scope != ApprovalScope::Class(record.shares_class_id));
        self.fractions.remove(&id);
        let instance = self.instances.get_mut(&id).expect("fractionalized parent exists");
        instance.lock = None;
        instance.owner = holder.to_owned();
        Ok(instance.clone())
    }

    // ---- invariants ----------------------------------------------------

    /// Human-readable descriptions of every broken registry invariant.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut violations = Vec::new();
        for (class_id, supply) in &self.supply {
            let held: u64 = self.holders(*class_id).iter().map(|(_, v)| v).sum();
            if held != *supply {
                violations.push(format!("class {class_id}: balances {held} != supply {supply}"));
            }
        }
        for (class_id, holders) in &self.balances {
            if !self.supply.contains_key(class_id) && holders.values().any(|v| *v > 0) {
                violations.push(format!("class {class_id}: balances without supply"));
            }
        }
        for instance in self.instances.values() {
            if !self.classes.contains_key(&instance.class_id) {
                violations.push(format!("token {} has no class", instance.id()));
            }
        }
        for (id, record) in &self.fractions {
            let locked = matches!(
                self.instances.get(id).and_then(|i| i.lock),
                Some(Lock::Fractionalized { shares_class_id }) if shares_class_id == record.shares_class_id
            );
            if !locked {
                violations.push(format!("fractionalized token {id} is not frozen"));
            }
            if self.supply(record.shares_class_id) != record.total_shares {
                violations.push(format!("share supply of {id} differs from its total"));
            }
        }
        violations
    }
}
