//! Evaluation metrics: HR@K and NDCG@K for leave-one-out accuracy,
//! α-NDCG@K for diversity, and MAD@K for fairness.

mod accuracy;
mod diversity;
mod fairness;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ItemCatalog, ItemId, Ranking, UserId};

pub use accuracy::{hit_ratio, ndcg};
pub use diversity::{alpha_dcg, alpha_ndcg, greedy_ideal_dcg, mean_alpha_ndcg, AlphaNdcgParams, CategoryMap};
pub use fairness::{mad, AttributeExtractor, FairnessRule, Group, GroupScores, Partition};

/// Held-out item per test user.
pub type GroundTruth = BTreeMap<UserId, ItemId>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no list for user {0}")]
    MissingUser(UserId),
    #[error("no users to evaluate")]
    NoUsers,
    #[error("item {0} has no categories")]
    MissingCategories(ItemId),
    #[error("item {item} lacks attribute {attr}")]
    MissingAttribute { item: ItemId, attr: String },
    #[error("item {item}: attribute {attr} value {value:?} is not numeric")]
    NonNumeric { item: ItemId, attr: String, value: String },
    #[error("item {0} is not in the catalog")]
    UnknownItem(ItemId),
    #[error("a fairness group received no scores; MAD is undefined")]
    EmptyGroup,
    #[error("invalid metric parameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub alpha: f64,
    /// Cutoff; defaults to the graph's K when unset.
    pub k: Option<usize>,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { alpha: 0.5, k: None }
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub alpha: f64,
    pub users: usize,
    pub hr: f64,
    pub ndcg: f64,
    pub alpha_ndcg: f64,
    /// `None` when one fairness group received no scores.
    pub mad: Option<f64>,
}

impl MetricReport {
    pub fn evaluate(
        lists: &BTreeMap<UserId, Ranking>,
        truth: &GroundTruth,
        catalog: &ItemCatalog,
        extractor: &AttributeExtractor,
        alpha: f64,
        k: usize,
    ) -> Result<Self, MetricError> {
        let categories = extractor.category_map(lists.values().map(|l| l), catalog)?;
        let mad = match mad(lists, extractor, catalog, k) {
            Ok(v) => Some(v),
            Err(MetricError::EmptyGroup) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            k,
            alpha,
            users: truth.len(),
            hr: hit_ratio(lists, truth, k)?,
            ndcg: ndcg(lists, truth, k)?,
            alpha_ndcg: mean_alpha_ndcg(lists, &categories, AlphaNdcgParams::new(alpha, k))?,
            mad,
        })
    }

    pub fn mad_text(&self) -> String {
        self.mad.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
    }

    /// Column headers in results-table order.
    pub fn header(&self) -> [String; 4] {
        let k = self.k;
        [
            format!("HR@{k}"),
            format!("NDCG@{k}"),
            format!("alpha-NDCG@{k}"),
            format!("MAD@{k}"),
        ]
    }

    pub fn values(&self) -> [String; 4] {
        [
            format!("{:.4}", self.hr),
            format!("{:.4}", self.ndcg),
            format!("{:.4}", self.alpha_ndcg),
            self.mad_text(),
        ]
    }

    /// Two-line text table, four decimals.
    pub fn to_table(&self, label: &str) -> String {
        let header = self.header();
        let values = self.values();
        let width = header.iter().map(String::len).max().unwrap_or(8).max(9);
        let mut out = format!("{:<16}", "model");
        for h in &header {
            out.push_str(&format!(" {h:>width$}"));
        }
        out.push('\n');
        out.push_str(&format!("{label:<16}"));
        for v in &values {
            out.push_str(&format!(" {v:>width$}"));
        }
        out.push('\n');
        out
    }

    /// `{"HR@10": 0.5, ..., "MAD@10": null}` plus run metadata.
    pub fn to_json(&self) -> serde_json::Value {
        let [hr, nd, an, md] = self.header();
        let mut map = serde_json::Map::new();
        map.insert(hr, self.hr.into());
        map.insert(nd, self.ndcg.into());
        map.insert(an, self.alpha_ndcg.into());
        map.insert(md, self.mad.map_or(serde_json::Value::Null, Into::into));
        map.insert("users".into(), self.users.into());
        map.insert("alpha".into(), self.alpha.into());
        map.insert("k".into(), self.k.into());
        serde_json::Value::Object(map)
    }
}
