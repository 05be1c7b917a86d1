use super::*;
use crate::content_store::ContentStore;
use crate::crypto::KeyPair;
use crate::identity::IdentityRegistry;

struct World {
    ids: IdentityRegistry,
    alice: String,
    bob: String,
    carol: String,
}

fn world() -> World {
    let mut ids = IdentityRegistry::new();
    let mut name = |label: &str| ids.register(KeyPair::derive(11, label).public_key(), 0).unwrap().username;
    let alice = name("alice");
    let bob = name("bob");
    let carol = name("carol");
    World { ids, alice, bob, carol }
}

fn nft_class(reg: &mut TokenRegistry, issuer: &str) -> u64 {
    reg.create_class(issuer, "PAT", Fungibility::NonFungible, None).unwrap()
}

#[test]
fn first_mint_gets_instance_one() {
    let w = world();
    let mut reg = TokenRegistry::default();
    for _ in 0..6 {
        reg.create_class(&w.alice, "X", Fungibility::Fungible, None).unwrap();
    }
    let class = nft_class(&mut reg, &w.alice);
    assert_eq!(class, 7);
    let first = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap();
    let second = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap();
    assert_eq!((first.instance_id, second.instance_id), (1, 2));
}

#[test]
fn mint_checks() {
    let w = world();
    let mut reg = TokenRegistry::default();
    let ft = reg.create_class(&w.alice, "PAY", Fungibility::Fungible, None).unwrap();
    assert_eq!(reg.mint_nft(&w.ids, &w.alice, ft, None), Err(TokenError::WrongFungibility(ft)));
    assert!(matches!(reg.mint_nft(&w.ids, "unobody", ft, None), Err(TokenError::UnknownIdentity(_))));
    let nft = nft_class(&mut reg, &w.alice);
    assert_eq!(reg.mint_nft(&w.ids, &w.bob, nft, None), Err(TokenError::NotIssuer(nft)));
    assert_eq!(reg.mint_ft(&w.ids, &w.alice, nft, 5), Err(TokenError::WrongFungibility(nft)));
    assert_eq!(reg.mint_ft(&w.ids, &w.alice, ft, 0), Err(TokenError::ZeroAmount));
    assert_eq!(reg.create_class(&w.alice, "", Fungibility::Fungible, None), Err(TokenError::EmptySymbol));
}

#[test]
fn metadata_round_trips_through_the_store() {
    let w = world();
    let mut store = ContentStore::new();
    let cid = store.put_object(br#"{"title":"widget"}"#);
    let mut reg = TokenRegistry::default();
    let class = nft_class(&mut reg, &w.alice);
    let token = reg.mint_nft(&w.ids, &w.alice, class, Some(cid)).unwrap();
    let fetched = store.get_object(token.metadata_cid.as_ref().unwrap()).unwrap();
    assert_eq!(fetched, br#"{"title":"widget"}"#);
    let other = store.put_object(b"replacement");
    assert_eq!(
        reg.set_metadata(&w.alice, token.id(), other.clone()),
        Err(TokenError::MetadataImmutable(token.id()))
    );
    let bare = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap();
    reg.set_metadata(&w.alice, bare.id(), other.clone()).unwrap();
    assert!(reg.set_metadata(&w.alice, bare.id(), other).is_err());
}

#[test]
fn fungible_minting_is_additive() {
    let w = world();
    let mut reg = TokenRegistry::default();
    let ft = reg.create_class(&w.alice, "PAY", Fungibility::Fungible, None).unwrap();
    assert_eq!(reg.mint_ft(&w.ids, &w.alice, ft, 100).unwrap().amount, 100);
    let mut reg = TokenRegistry::default();
    let ft = reg.create_class(&w.alice, "PAY", Fungibility::Fungible, None).unwrap();
    reg.mint_ft(&w.ids, &w.alice, ft, 60).unwrap();
    reg.mint_ft(&w.ids, &w.alice, ft, 40).unwrap();
    assert_eq!(reg.balance(ft, &w.alice), 100);
    assert_eq!(reg.supply(ft), 100);
}

#[test]
fn operator_transfer_and_revocation() {
    let w = world();
    let mut reg = TokenRegistry::default();
    let class = nft_class(&mut reg, &w.alice);
    let a = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap().id();
    let b = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap().id();
    reg.transfer(&w.alice, &w.bob, Asset::Nft(a), &w.alice).unwrap();
    assert_eq!(reg.owner_of(a), Some(w.bob.as_str()));
    assert_eq!(
        reg.transfer(&w.alice, &w.carol, Asset::Nft(b), &w.carol),
        Err(TokenError::NotApprovedOperator { owner: w.alice.clone(), actor: w.carol.clone() })
    );
    reg.set_approval(&w.alice, &w.carol, ApprovalScope::Class(class), true).unwrap();
    reg.transfer(&w.alice, &w.carol, Asset::Nft(b), &w.carol).unwrap();
    reg.transfer(&w.carol, &w.alice, Asset::Nft(b), &w.carol).unwrap();
    reg.set_approval(&w.alice, &w.carol, ApprovalScope::Class(class), false).unwrap();
    assert!(matches!(
        reg.transfer(&w.alice, &w.carol, Asset::Nft(b), &w.carol),
        Err(TokenError::NotApprovedOperator { .. })
    ));
    reg.set_approval(&w.alice, &w.carol, ApprovalScope::AllClasses, true).unwrap();
    reg.transfer(&w.alice, &w.carol, Asset::Nft(b), &w.carol).unwrap();
    assert_eq!(reg.set_approval(&w.alice, &w.alice, ApprovalScope::AllClasses, true), Err(TokenError::SelfApproval));
    assert_eq!(reg.transfer(&w.alice, &w.bob, Asset::Nft(a), &w.alice), Err(TokenError::NotOwner(w.alice.clone())));
}

#[test]
fn fractionalized_token_is_frozen() {
    let w = world();
    let mut reg = TokenRegistry::default();
    let class = nft_class(&mut reg, &w.alice);
    let id = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap().id();
    assert_eq!(reg.fractionalize(&w.alice, id, 1), Err(TokenError::TooFewShares));
    assert_eq!(reg.fractionalize(&w.bob, id, 10), Err(TokenError::NotOwner(w.bob.clone())));
    let record = reg.fractionalize(&w.alice, id, 100).unwrap();
    assert_eq!(reg.balance(record.shares_class_id, &w.alice), 100);
    assert!(reg.instance(id).unwrap().frozen());
    assert_eq!(reg.transfer(&w.alice, &w.bob, Asset::Nft(id), &w.alice), Err(TokenError::FrozenAsset(id)));
    assert_eq!(reg.fractionalize(&w.alice, id, 5), Err(TokenError::AlreadyFractionalized(id)));

    let shares = record.shares_class_id;
    reg.transfer(&w.alice, &w.bob, Asset::Fungible { class_id: shares, amount: 30 }, &w.alice).unwrap();
    reg.transfer(&w.alice, &w.carol, Asset::Fungible { class_id: shares, amount: 20 }, &w.alice).unwrap();
    let total: u64 = reg.holders(shares).iter().map(|(_, v)| v).sum();
    assert_eq!(total, 100);
    assert_eq!(reg.balance(shares, &w.alice), 50);
    assert_eq!(reg.defractionalize(&w.alice, id), Err(TokenError::IncompleteShares { held: 50, total: 100 }));
}

#[test]
fn defractionalize_restores_the_pre_state() {
    let w = world();
    let mut reg = TokenRegistry::default();
    let class = nft_class(&mut reg, &w.alice);
    let id = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap().id();
    let before = reg.clone();
    let record = reg.fractionalize(&w.alice, id, 100).unwrap();
    reg.transfer(&w.alice, &w.bob, Asset::Fungible { class_id: record.shares_class_id, amount: 100 }, &w.alice)
        .unwrap();
    let back = reg.defractionalize(&w.bob, id).unwrap();
    assert!(!back.frozen());
    assert_eq!(back.owner, w.bob);

    let mut reg2 = before.clone();
    let record = reg2.fractionalize(&w.alice, id, 100).unwrap();
    reg2.defractionalize(&w.alice, id).unwrap();
    assert!(reg2.class(record.shares_class_id).is_none());
    // Identical apart from the consumed class id counter.
    assert_eq!(reg2.instances().collect::<Vec<_>>(), before.instances().collect::<Vec<_>>());
    assert_eq!(reg2.classes().collect::<Vec<_>>(), before.classes().collect::<Vec<_>>());
    assert_eq!(reg2.supply(record.shares_class_id), 0);
    assert!(reg2.check_invariants().is_empty());
    assert_eq!(reg2.defractionalize(&w.alice, id), Err(TokenError::NotFractionalized(id)));
}

#[test]
fn batch_moves_everything_or_nothing() {
    let w = world();
    let mut reg = TokenRegistry::default();
    let class = nft_class(&mut reg, &w.alice);
    let ft = reg.create_class(&w.alice, "PAY", Fungibility::Fungible, None).unwrap();
    let nft = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap().id();
    reg.mint_ft(&w.ids, &w.alice, ft, 60).unwrap();

    reg.batch_transfer(&w.alice, &w.bob, &[], &w.alice).unwrap();
    let snapshot = reg.clone();
    let err = reg
        .batch_transfer(
            &w.alice,
            &w.bob,
            &[Asset::Nft(nft), Asset::Fungible { class_id: ft, amount: 61 }],
            &w.alice,
        )
        .unwrap_err();
    assert!(matches!(err, TokenError::BatchFailed { index: 1, .. }));
    assert_eq!(reg, snapshot);

    reg.batch_transfer(&w.alice, &w.bob, &[Asset::Nft(nft), Asset::Fungible { class_id: ft, amount: 50 }], &w.alice)
        .unwrap();
    assert_eq!(reg.owner_of(nft), Some(w.bob.as_str()));
    assert_eq!(reg.balance(ft, &w.bob), 50);
    assert_eq!(reg.balance(ft, &w.alice), 10);
}

#[test]
fn semi_fungible_pool_and_instances() {
    let w = world();
    let mut reg = TokenRegistry::default();
    let class = reg.create_class(&w.alice, "TICKET", Fungibility::SemiFungible, None).unwrap();
    reg.mint_ft(&w.ids, &w.alice, class, 10).unwrap();
    let seat = reg.mint_nft(&w.ids, &w.alice, class, None).unwrap();
    assert_eq!(seat.instance_id, 1);
    reg.transfer(&w.alice, &w.bob, Asset::Fungible { class_id: class, amount: 4 }, &w.alice).unwrap();
    reg.transfer(&w.alice, &w.carol, Asset::Nft(seat.id()), &w.alice).unwrap();
    assert_eq!(reg.balance(class, &w.bob), 4);
    assert_eq!(reg.owner_of(seat.id()), Some(w.carol.as_str()));
}

#[test]
fn profile_gating_follows_the_matrix() {
    let w = world();
    let mut erc721 = TokenRegistry::new(Standard::Erc721);
    assert_eq!(
        erc721.create_class(&w.alice, "PAY", Fungibility::Fungible, None),
        Err(TokenError::ProfileUnsupported(Feature::FungibleTokens, Standard::Erc721))
    );
    let class = nft_class(&mut erc721, &w.alice);
    let id = erc721.mint_nft(&w.ids, &w.alice, class, None).unwrap().id();
    assert_eq!(
        erc721.batch_transfer(&w.alice, &w.bob, &[Asset::Nft(id)], &w.alice),
        Err(TokenError::ProfileUnsupported(Feature::BatchTransfer, Standard::Erc721))
    );
    assert_eq!(
        erc721.fractionalize(&w.alice, id, 10),
        Err(TokenError::ProfileUnsupported(Feature::Fractionalization, Standard::Erc721))
    );
    erc721.set_approval(&w.alice, &w.bob, ApprovalScope::AllClasses, true).unwrap();

    let mut dgoods = TokenRegistry::new(Standard::DGoods);
    assert_eq!(
        dgoods.set_approval(&w.alice, &w.bob, ApprovalScope::AllClasses, true),
        Err(TokenError::ProfileUnsupported(Feature::Operator, Standard::DGoods))
    );
}
