//! Random registry workload checked against a plain shadow ledger of who
//! holds what.

use std::collections::BTreeMap;

use patent_ledger::crypto::KeyPair;
use patent_ledger::identity::IdentityRegistry;
use patent_ledger::token::{ApprovalScope, Asset, Fungibility, NftId, Standard, TokenError, TokenRegistry};
use rand::seq::SliceRandom;
use rand::Rng;

pub struct TokenWorld {
    pub ids: IdentityRegistry,
    pub users: Vec<String>,
    pub reg: TokenRegistry,
    /// Fungible balances by class, then owner.
    pub shadow_ft: BTreeMap<u64, BTreeMap<String, u64>>,
    pub shadow_nft: BTreeMap<NftId, String>,
    /// Share classes by parent NFT, with their total.
    pub shadow_fractions: BTreeMap<NftId, (u64, u64)>,
}

#[derive(Debug, Default)]
pub struct WorkloadStats {
    pub ops: usize,
    pub failed: usize,
    pub batches: usize,
    pub failed_batches: usize,
}

impl TokenWorld {
    /// Four users, one fungible class each, and an NFT class of eight
    /// tokens spread over the users. All minting happens here.
    pub fn new(seed: u64) -> Self {
        let mut ids = IdentityRegistry::new();
        let users: Vec<String> = (0..4)
            .map(|i| ids.register(KeyPair::derive(seed, &format!("user-{i}")).public_key(), 0).unwrap().username)
            .collect();
        let mut reg = TokenRegistry::new(Standard::Algorand);
        let mut shadow_ft = BTreeMap::new();
        for (i, user) in users.iter().enumerate() {
            let class = reg.create_class(user, &format!("F{i}"), Fungibility::Fungible, None).unwrap();
            reg.mint_ft(&ids, user, class, 1000).unwrap();
            shadow_ft.insert(class, BTreeMap::from([(user.clone(), 1000)]));
        }
        let nft_class = reg.create_class(&users[0], "N", Fungibility::NonFungible, None).unwrap();
        let mut shadow_nft = BTreeMap::new();
        for i in 0..8 {
            let id = reg.mint_nft(&ids, &users[0], nft_class, None).unwrap().id();
            let owner = &users[i % users.len()];
            if owner != &users[0] {
                reg.transfer(&users[0], owner, Asset::Nft(id), &users[0]).unwrap();
            }
            shadow_nft.insert(id, owner.clone());
        }
        Self {
            ids,
            users,
            reg,
            shadow_ft,
            shadow_nft,
            shadow_fractions: BTreeMap::new(),
        }
    }

    fn random_asset(&self, rng: &mut impl Rng) -> Asset {
        if rng.gen_bool(0.6) {
            let classes: Vec<u64> = self.shadow_ft.keys().copied().collect();
            Asset::Fungible {
                class_id: *classes.choose(rng).unwrap(),
                amount: rng.gen_range(0..700),
            }
        } else {
            let ids: Vec<NftId> = self.shadow_nft.keys().copied().collect();
            Asset::Nft(*ids.choose(rng).unwrap())
        }
    }

    fn user(&self, rng: &mut impl Rng) -> String {
        self.users.choose(rng).unwrap().clone()
    }

    fn shadow_move(&mut self, from: &str, to: &str, asset: Asset) {
        match asset {
            Asset::Nft(id) => {
                self.shadow_nft.insert(id, to.to_owned());
            }
            Asset::Fungible { class_id, amount } => {
                let holders = self.shadow_ft.get_mut(&class_id).unwrap();
                *holders.get_mut(from).unwrap() -= amount;
                *holders.entry(to.to_owned()).or_default() += amount;
            }
        }
    }

    /// Applies one random operation. A failed operation must leave the
    /// registry exactly as it was; a successful one is mirrored in the shadow.
    pub fn step(&mut self, rng: &mut impl Rng, stats: &mut WorkloadStats) -> Result<(), String> {
        let before = self.reg.clone();
        let from = self.user(rng);
        let to = self.user(rng);
        let actor = if rng.gen_bool(0.8) { from.clone() } else { self.user(rng) };
        let choice = rng.gen_range(0..100);
        let (label, result): (&str, Result<(), TokenError>) = match choice {
            0..=39 => {
                let asset = self.random_asset(rng);
                let r = self.reg.transfer(&from, &to, asset, &actor);
                if r.is_ok() {
                    self.shadow_move(&from, &to, asset);
                }
                ("transfer", r)
            }
            40..=69 => {
                stats.batches += 1;
                let assets: Vec<Asset> = (0..rng.gen_range(1..5)).map(|_| self.random_asset(rng)).collect();
                let r = self.reg.batch_transfer(&from, &to, &assets, &actor);
                if r.is_ok() {
                    for asset in &assets {
                        self.shadow_move(&from, &to, *asset);
                    }
                } else {
                    stats.failed_batches += 1;
                }
                ("batch", r)
            }
            70..=79 => {
                let scope = if rng.gen_bool(0.5) {
                    ApprovalScope::AllClasses
                } else {
                    ApprovalScope::Class(self.random_asset(rng).class_id())
                };
                ("approve", self.reg.set_approval(&from, &to, scope, rng.gen_bool(0.7)))
            }
            80..=89 => {
                let id = *self.shadow_nft.keys().collect::<Vec<_>>().choose(rng).unwrap();
                let shares = rng.gen_range(1..12);
                let r = self.reg.fractionalize(&from, *id, shares).map(|record| {
                    self.shadow_ft
                        .insert(record.shares_class_id, BTreeMap::from([(from.clone(), shares)]));
                    self.shadow_fractions.insert(*id, (record.shares_class_id, shares));
                });
                ("fractionalize", r)
            }
            _ => {
                let id = **self.shadow_nft.keys().collect::<Vec<_>>().choose(rng).unwrap();
                let r = self.reg.defractionalize(&from, id).map(|_| {
                    let (class, _) = self.shadow_fractions.remove(&id).unwrap();
                    self.shadow_ft.remove(&class);
                    self.shadow_nft.insert(id, from.clone());
                });
                ("defractionalize", r)
            }
        };
        stats.ops += 1;
        if result.is_err() {
            stats.failed += 1;
            if self.reg != before {
                return Err(format!("failed {label} changed the registry: {result:?}"));
            }
        }
        self.compare()
            .map_err(|e| format!("after {label} ({result:?}): {e}"))
    }

    /// Registry and shadow agree on every balance, owner and supply.
    pub fn compare(&self) -> Result<(), String> {
        for (class, holders) in &self.shadow_ft {
            let total: u64 = holders.values().sum();
            if self.reg.supply(*class) != total {
                return Err(format!("class {class}: supply {} != {total}", self.reg.supply(*class)));
            }
            for (owner, amount) in holders {
                if self.reg.balance(*class, owner) != *amount {
                    return Err(format!("class {class}: {owner} holds {}, expected {amount}", self.reg.balance(*class, owner)));
                }
            }
        }
        for (id, owner) in &self.shadow_nft {
            if self.reg.owner_of(*id) != Some(owner.as_str()) {
                return Err(format!("{id} owned by {:?}, expected {owner}", self.reg.owner_of(*id)));
            }
        }
        let base_classes = self.users.len() as u64;
        for class in 1..=base_classes {
            if self.reg.supply(class) != 1000 {
                return Err(format!("class {class} supply drifted to {}", self.reg.supply(class)));
            }
        }
        let violations = self.reg.check_invariants();
        if !violations.is_empty() {
            return Err(violations.join("; "));
        }
        Ok(())
    }
}
