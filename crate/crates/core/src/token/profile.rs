//! Token standard profiles as capability masks.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Feature {
    FungibleTokens,
    NonFungibleTokens,
    BatchTransfer,
    Operator,
    Fractionalization,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::FungibleTokens,
        Feature::NonFungibleTokens,
        Feature::BatchTransfer,
        Feature::Operator,
        Feature::Fractionalization,
    ];

    pub fn column_title(self) -> &'static str {
        match self {
            Feature::FungibleTokens => "Support FTs",
            Feature::NonFungibleTokens => "Support NFTs",
            Feature::BatchTransfer => "Support batch transferring",
            Feature::Operator => "Support operator",
            Feature::Fractionalization => "Fractionalized NFTs",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Standard {
    Erc721,
    Erc1155,
    DGoods,
    Algorand,
    Tezos,
    Flow,
}

impl Standard {
    pub const ALL: [Standard; 6] = [
        Standard::Erc721,
        Standard::Erc1155,
        Standard::DGoods,
        Standard::Algorand,
        Standard::Tezos,
        Standard::Flow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Standard::Erc721 => "ERC-721",
            Standard::Erc1155 => "ERC-1155",
            Standard::DGoods => "dGoods",
            Standard::Algorand => "Algorand",
            Standard::Tezos => "Tezos",
            Standard::Flow => "Flow",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let wanted = name.to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|s| s.name().to_ascii_lowercase().replace('-', "") == wanted)
    }

    /// Feature flags in [`Feature::ALL`] order.
    pub fn features(self) -> [bool; 5] {
        match self {
            Standard::Erc721 => [false, true, false, true, false],
            Standard::Erc1155 => [true, true, true, true, false],
            Standard::DGoods => [true, true, true, false, false],
            Standard::Algorand => [true, true, true, true, true],
            Standard::Tezos => [true, true, true, true, true],
            Standard::Flow => [true, true, true, true, false],
        }
    }

    pub fn supports(self, feature: Feature) -> bool {
        let index = Feature::ALL.iter().position(|f| *f == feature).expect("listed");
        self.features()[index]
    }
}

impl fmt::Display for Standard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConformanceRow {
    pub standard: Standard,
    pub features: [bool; 5],
}

pub fn conformance_matrix() -> Vec<ConformanceRow> {
    Standard::ALL
        .into_iter()
        .map(|standard| ConformanceRow {
            standard,
            features: standard.features(),
        })
        .collect()
}

/// Tab-separated rendering: a header row, then one Yes/No row per standard.
pub fn render_matrix() -> String {
    let mut out = String::from("NFT standards");
    for feature in Feature::ALL {
        out.push('\t');
        out.push_str(feature.column_title());
    }
    out.push('\n');
    for row in conformance_matrix() {
        out.push_str(row.standard.name());
        for flag in row.features {
            out.push('\t');
            out.push_str(if flag { "Yes" } else { "No" });
        }
        out.push('\n');
    }
    out
}
