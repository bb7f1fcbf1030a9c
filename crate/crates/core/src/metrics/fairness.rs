use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::diversity::CategoryMap;
use super::MetricError;
use crate::types::{linear_scores, Item, ItemCatalog, Ranking, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Group0,
    Group1,
}

/// Binary partition of items by one attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Partition {
    /// Numeric attribute: group 0 when below `threshold` (or equal to it,
    /// when `inclusive`), group 1 otherwise.
    Below { threshold: f64, inclusive: bool },
    /// Group 0 when the value is one of `group0`, group 1 otherwise.
    ValueSet { group0: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRule {
    pub attr: String,
    pub partition: Partition,
}

impl FairnessRule {
    /// Release year before 1996 versus 1996 and later.
    pub fn year_before_1996() -> Self {
        Self {
            attr: "year".into(),
            partition: Partition::Below {
                threshold: 1996.0,
                inclusive: false,
            },
        }
    }

    /// Videos of at most 60,000 ms versus longer ones.
    pub fn short_video() -> Self {
        Self {
            attr: "video_duration".into(),
            partition: Partition::Below {
                threshold: 60_000.0,
                inclusive: true,
            },
        }
    }

    pub fn language(group0: &[&str]) -> Self {
        Self {
            attr: "language".into(),
            partition: Partition::ValueSet {
                group0: group0.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn group(&self, item: &Item) -> Result<Group, MetricError> {
        let missing = || MetricError::MissingAttribute {
            item: item.id.clone(),
            attr: self.attr.clone(),
        };
        let value = item.features.get(&self.attr).ok_or_else(missing)?.trim();
        let in_group0 = match &self.partition {
            Partition::Below { threshold, inclusive } => {
                let v: f64 = value.parse().map_err(|_| MetricError::NonNumeric {
                    item: item.id.clone(),
                    attr: self.attr.clone(),
                    value: value.to_string(),
                })?;
                if *inclusive {
                    v <= *threshold
                } else {
                    v < *threshold
                }
            }
            Partition::ValueSet { group0 } => group0.iter().any(|g| g == value),
        };
        Ok(if in_group0 { Group::Group0 } else { Group::Group1 })
    }
}

/// Which item attributes feed the diversity and fairness metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeExtractor {
    pub diversity_attr: String,
    /// Splits multi-valued diversity attributes ("Action|Comedy").
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    pub fairness: FairnessRule,
}

fn default_delimiter() -> String {
    "|".into()
}

impl AttributeExtractor {
    pub fn movielens() -> Self {
        Self {
            diversity_attr: "genre".into(),
            delimiter: default_delimiter(),
            fairness: FairnessRule::year_before_1996(),
        }
    }

    pub fn kuairand() -> Self {
        Self {
            diversity_attr: "upload_type".into(),
            delimiter: default_delimiter(),
            fairness: FairnessRule::short_video(),
        }
    }

    pub fn douban() -> Self {
        Self {
            diversity_attr: "CategoryID".into(),
            delimiter: default_delimiter(),
            fairness: FairnessRule::language(&["汉语普通话"]),
        }
    }

    pub fn categories(&self, item: &Item) -> Result<BTreeSet<String>, MetricError> {
        let raw = item
            .features
            .get(&self.diversity_attr)
            .ok_or_else(|| MetricError::MissingAttribute {
                item: item.id.clone(),
                attr: self.diversity_attr.clone(),
            })?;
        let cats: BTreeSet<String> = raw
            .split(self.delimiter.as_str())
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        if cats.is_empty() {
            return Err(MetricError::MissingCategories(item.id.clone()));
        }
        Ok(cats)
    }

    /// Category sets for every item in the given lists.
    pub fn category_map<'a>(
        &self,
        lists: impl IntoIterator<Item = &'a Ranking>,
        catalog: &ItemCatalog,
    ) -> Result<CategoryMap, MetricError> {
        let mut map = CategoryMap::new();
        for list in lists {
            for id in &list.items {
                if map.contains_key(id) {
                    continue;
                }
                let item = catalog.get(id).ok_or_else(|| MetricError::UnknownItem(id.clone()))?;
                map.insert(id.clone(), self.categories(item)?);
            }
        }
        Ok(map)
    }
}

/// Linearised scores of every list's top `k`, pooled by fairness group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupScores {
    pub group0: Vec<f64>,
    pub group1: Vec<f64>,
}

impl GroupScores {
    pub fn collect(
        lists: &BTreeMap<UserId, Ranking>,
        rule: &FairnessRule,
        catalog: &ItemCatalog,
        k: usize,
    ) -> Result<Self, MetricError> {
        let scores = linear_scores(k).map_err(|_| MetricError::InvalidParam("k must be >= 1".into()))?;
        let mut out = Self::default();
        for list in lists.values() {
            for (id, score) in list.items.iter().zip(&scores) {
                let item = catalog.get(id).ok_or_else(|| MetricError::UnknownItem(id.clone()))?;
                match rule.group(item)? {
                    Group::Group0 => out.group0.push(*score),
                    Group::Group1 => out.group1.push(*score),
                }
            }
        }
        Ok(out)
    }

    /// `|mean(group0) - mean(group1)|`.
    pub fn mad(&self) -> Result<f64, MetricError> {
        if self.group0.is_empty() || self.group1.is_empty() {
            return Err(MetricError::EmptyGroup);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok((mean(&self.group0) - mean(&self.group1)).abs())
    }
}

/// Corpus-level MAD@k: scores are pooled over all users before averaging.
pub fn mad(
    lists: &BTreeMap<UserId, Ranking>,
    extractor: &AttributeExtractor,
    catalog: &ItemCatalog,
    k: usize,
) -> Result<f64, MetricError> {
    GroupScores::collect(lists, &extractor.fairness, catalog, k)?.mad()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FeatureMap, ItemId};
    use proptest::prelude::*;

    fn item(id: &str, year: &str) -> Item {
        Item::new(
            ItemId::new(id).unwrap(),
            FeatureMap::from_pairs([("year", year), ("genre", "Drama|Comedy")]).unwrap(),
        )
    }

    fn one_list(ids: &[&str]) -> BTreeMap<UserId, Ranking> {
        let mut m = BTreeMap::new();
        m.insert(UserId::new("u").unwrap(), ids.iter().map(|i| ItemId::new(*i).unwrap()).collect());
        m
    }

    #[test]
    fn four_item_example() {
        let catalog: ItemCatalog = [item("a", "1990"), item("b", "2000"), item("c", "1980"), item("d", "1999")]
            .into_iter()
            .collect();
        let v = mad(&one_list(&["a", "b", "c", "d"]), &AttributeExtractor::movielens(), &catalog, 4).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn equal_multisets_give_zero() {
        let catalog: ItemCatalog = [item("a", "1990"), item("b", "2000"), item("c", "2001"), item("d", "1980")]
            .into_iter()
            .collect();
        // scores 1, 2/3, 1/3, 0: groups {1, 0} and {2/3, 1/3} have equal means
        let v = mad(&one_list(&["a", "b", "c", "d"]), &AttributeExtractor::movielens(), &catalog, 4).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn single_group_is_undefined() {
        let catalog: ItemCatalog = [item("a", "1990"), item("b", "1991")].into_iter().collect();
        assert_eq!(
            mad(&one_list(&["a", "b"]), &AttributeExtractor::movielens(), &catalog, 2),
            Err(MetricError::EmptyGroup)
        );
    }

    #[test]
    fn partition_presets() {
        let y = FairnessRule::year_before_1996();
        assert_eq!(y.group(&item("a", "1995")).unwrap(), Group::Group0);
        assert_eq!(y.group(&item("a", "1996")).unwrap(), Group::Group1);
        let d = FairnessRule::short_video();
        let video = |ms: &str| Item::new(ItemId::new("v").unwrap(), FeatureMap::from_pairs([("video_duration", ms)]).unwrap());
        assert_eq!(d.group(&video("60000")).unwrap(), Group::Group0);
        assert_eq!(d.group(&video("60001")).unwrap(), Group::Group1);
        assert!(matches!(y.group(&video("1")), Err(MetricError::MissingAttribute { .. })));
        let l = FairnessRule::language(&["English"]);
        let film = |lang: &str| Item::new(ItemId::new("f").unwrap(), FeatureMap::from_pairs([("language", lang)]).unwrap());
        assert_eq!(l.group(&film("English")).unwrap(), Group::Group0);
        assert_eq!(l.group(&film("French")).unwrap(), Group::Group1);
    }

    #[test]
    fn categories_split_on_delimiter() {
        let cats = AttributeExtractor::movielens().categories(&item("a", "1990")).unwrap();
        assert_eq!(cats.into_iter().collect::<Vec<_>>(), ["Comedy", "Drama"]);
    }

    proptest! {
        #[test]
        fn mad_symmetric_and_bounded(
            g0 in proptest::collection::vec(0.0f64..=1.0, 1..10),
            g1 in proptest::collection::vec(0.0f64..=1.0, 1..10),
        ) {
            let a = GroupScores { group0: g0.clone(), group1: g1.clone() }.mad().unwrap();
            let b = GroupScores { group0: g1, group1: g0 }.mad().unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
