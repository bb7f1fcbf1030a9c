//! Domain types shared by every module.
//!
//! Users and items carry semantic, text-valued features rather than numeric
//! embeddings; prompts are rendered from them and metric attributes (genre,
//! year, ...) are read from them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("identifier must be non-empty")]
    EmptyId,
    #[error("identifier {0:?} contains a reserved character (comma, bracket or whitespace)")]
    ReservedChar(String),
    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),
    #[error("feature names and values must be non-empty (name {0:?})")]
    EmptyFeature(String),
    #[error("candidate list must contain at least one item")]
    EmptyCandidates,
    #[error("duplicate candidate id {0}")]
    DuplicateCandidate(ItemId),
    #[error("scores length {scores} does not match items length {items}")]
    ScoreLength { items: usize, scores: usize },
    #[error("linear_scores requires k >= 1")]
    ZeroLength,
}

fn check_id(raw: &str) -> Result<(), TypeError> {
    if raw.is_empty() {
        return Err(TypeError::EmptyId);
    }
    if raw
        .chars()
        .any(|c| c == ',' || c == '[' || c == ']' || c.is_whitespace())
    {
        return Err(TypeError::ReservedChar(raw.to_string()));
    }
    Ok(())
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(raw: impl Into<String>) -> Result<Self, TypeError> {
                let raw = raw.into();
                check_id(&raw)?;
                Ok(Self(raw))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = TypeError;
            fn try_from(raw: String) -> Result<Self, Self::Error> {
                Self::new(raw)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl std::str::FromStr for $name {
            type Err = TypeError;
            fn from_str(raw: &str) -> Result<Self, Self::Err> {
                Self::new(raw)
            }
        }
    };
}

string_id!(
    /// Opaque item identifier. Commas, brackets and whitespace are rejected
    /// because they delimit ids in prompts and in the reply grammar.
    ItemId
);
string_id!(
    /// Opaque user identifier.
    UserId
);

/// Ordered `(name, value)` pairs of semantic features.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, String)>", into = "Vec<(String, String)>")]
pub struct FeatureMap {
    entries: Vec<(String, String)>,
}

impl FeatureMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, N, V>(pairs: I) -> Result<Self, TypeError>
    where
        I: IntoIterator<Item = (N, V)>,
        N: Into<String>,
        V: Into<String>,
    {
        let mut map = Self::new();
        for (name, value) in pairs {
            map.insert(name, value)?;
        }
        Ok(map)
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        value: impl Into<String>,
    ) -> Result<(), TypeError> {
        let (name, value) = (name.into(), value.into());
        if name.is_empty() || value.is_empty() {
            return Err(TypeError::EmptyFeature(name));
        }
        if self.get(&name).is_some() {
            return Err(TypeError::DuplicateFeature(name));
        }
        self.entries.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// `name: value; name: value` rendering used in prompts.
    pub fn describe(&self) -> String {
        self.entries
            .iter()
            .map(|(n, v)| format!("{n}: {v}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl TryFrom<Vec<(String, String)>> for FeatureMap {
    type Error = TypeError;
    fn try_from(pairs: Vec<(String, String)>) -> Result<Self, Self::Error> {
        Self::from_pairs(pairs)
    }
}

impl From<FeatureMap> for Vec<(String, String)> {
    fn from(map: FeatureMap) -> Self {
        map.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    #[serde(default)]
    pub features: FeatureMap,
}

impl User {
    pub fn new(id: UserId, features: FeatureMap) -> Self {
        Self { id, features }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    #[serde(default)]
    pub features: FeatureMap,
}

impl Item {
    pub fn new(id: ItemId, features: FeatureMap) -> Self {
        Self { id, features }
    }
}

/// Items keyed by id. Ids are unique by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ItemCatalog {
    items: BTreeMap<ItemId, Item>,
}

impl ItemCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an item, returning the previous entry under the same id.
    pub fn insert(&mut self, item: Item) -> Option<Item> {
        self.items.insert(item.id.clone(), item)
    }

    pub fn get(&self, id: &ItemId) -> Option<&Item> {
        self.items.get(id)
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.items.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Item> {
        self.items.values()
    }
}

impl FromIterator<Item> for ItemCatalog {
    fn from_iter<T: IntoIterator<Item = Item>>(iter: T) -> Self {
        let mut catalog = Self::new();
        for item in iter {
            catalog.insert(item);
        }
        catalog
    }
}

/// The upstream-ranked input sequence for one user, optionally with the
/// upstream model's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidates")]
pub struct CandidateList {
    user_id: UserId,
    items: Vec<ItemId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawCandidates {
    user_id: UserId,
    items: Vec<ItemId>,
    scores: Option<Vec<f64>>,
}

impl TryFrom<RawCandidates> for CandidateList {
    type Error = TypeError;
    fn try_from(raw: RawCandidates) -> Result<Self, Self::Error> {
        Self::new(raw.user_id, raw.items, raw.scores)
    }
}

impl CandidateList {
    pub fn new(
        user_id: UserId,
        items: Vec<ItemId>,
        scores: Option<Vec<f64>>,
    ) -> Result<Self, TypeError> {
        if items.is_empty() {
            return Err(TypeError::EmptyCandidates);
        }
        let mut seen = HashSet::with_capacity(items.len());
        for id in &items {
            if !seen.insert(id) {
                return Err(TypeError::DuplicateCandidate(id.clone()));
            }
        }
        if let Some(s) = &scores {
            if s.len() != items.len() {
                return Err(TypeError::ScoreLength {
                    items: items.len(),
                    scores: s.len(),
                });
            }
        }
        Ok(Self {
            user_id,
            items,
            scores,
        })
    }

    pub fn user_id(&self) -> &UserId {
        &self.user_id
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.items.contains(id)
    }

    pub fn position(&self, id: &ItemId) -> Option<usize> {
        self.items.iter().position(|x| x == id)
    }

    /// The first `n` candidates (with their scores), or the whole list.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.clamp(1, self.items.len());
        Self {
            user_id: self.user_id.clone(),
            items: self.items[..n].to_vec(),
            scores: self.scores.as_ref().map(|s| s[..n].to_vec()),
        }
    }
}

/// An ordered list of item ids produced by a reranking step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking {
    pub items: Vec<ItemId>,
}

impl Ranking {
    pub fn new(items: Vec<ItemId>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn top(&self, k: usize) -> Ranking {
        Ranking::new(self.items.iter().take(k).cloned().collect())
    }

    /// 1-based rank of `id`, if present.
    pub fn rank_of(&self, id: &ItemId) -> Option<usize> {
        self.items.iter().position(|x| x == id).map(|p| p + 1)
    }

    pub fn joined(&self) -> String {
        self.items
            .iter()
            .map(ItemId::as_str)
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl FromIterator<ItemId> for Ranking {
    fn from_iter<T: IntoIterator<Item = ItemId>>(iter: T) -> Self {
        Ranking::new(iter.into_iter().collect())
    }
}

/// Free-form focus sentence for one reranking run. An empty goal means no
/// extra focus; traversal then starts from, and usually stays with, accuracy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Goal(pub String);

impl Goal {
    pub fn new(text: impl Into<String>) -> Self {
        Self(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.trim().is_empty()
    }
}

/// Everything one reranking run reads: the user, their candidates, the
/// catalog holding candidate features, and the goal sentence.
#[derive(Debug, Clone, Copy)]
pub struct RerankInput<'a> {
    pub user: &'a User,
    pub candidates: &'a CandidateList,
    pub catalog: &'a ItemCatalog,
    pub goal: &'a Goal,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid ranking: duplicates {duplicates:?}, foreign ids {foreign:?}")]
pub struct RankingViolation {
    pub duplicates: Vec<ItemId>,
    pub foreign: Vec<ItemId>,
}

/// Checks that `ranking` is duplicate-free and drawn from `candidates`.
pub fn validate_ranking(
    ranking: &Ranking,
    candidates: &CandidateList,
) -> Result<(), RankingViolation> {
    let allowed: HashSet<&ItemId> = candidates.items().iter().collect();
    let mut seen = HashSet::new();
    let mut duplicates = BTreeSet::new();
    let mut foreign = BTreeSet::new();
    for id in &ranking.items {
        if !seen.insert(id) {
            duplicates.insert(id.clone());
        }
        if !allowed.contains(id) {
            foreign.insert(id.clone());
        }
    }
    if duplicates.is_empty() && foreign.is_empty() {
        Ok(())
    } else {
        Err(RankingViolation {
            duplicates: duplicates.into_iter().collect(),
            foreign: foreign.into_iter().collect(),
        })
    }
}

/// Position scores falling linearly from 1.0 at rank 1 to 0.0 at rank `k`.
pub fn linear_scores(k: usize) -> Result<Vec<f64>, TypeError> {
    match k {
        0 => Err(TypeError::ZeroLength),
        1 => Ok(vec![1.0]),
        _ => {
            let span = (k - 1) as f64;
            Ok((0..k).map(|j| 1.0 - j as f64 / span).collect())
        }
    }
}

#[cfg(test)]
pub(crate) fn ids(raw: &[&str]) -> Vec<ItemId> {
    raw.iter().map(|s| ItemId::new(*s).unwrap()).collect()
}

#[cfg(test)]
pub(crate) fn candidates(raw: &[&str]) -> CandidateList {
    CandidateList::new(UserId::new("u").unwrap(), ids(raw), None).unwrap()
}
