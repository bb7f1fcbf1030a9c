use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::types::{ItemId, Ranking, UserId};

pub type CategoryMap = HashMap<ItemId, BTreeSet<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaNdcgParams {
    /// Redundancy penalty in `[0, 1]`.
    pub alpha: f64,
    pub k: usize,
}

impl AlphaNdcgParams {
    pub fn new(alpha: f64, k: usize) -> Self {
        Self { alpha, k }
    }
}

fn discount(position: usize) -> f64 {
    1.0 / (position as f64 + 2.0).log2()
}

/// Gain of an item given how often each category has been seen above it.
pub(crate) fn novelty_gain(cats: &BTreeSet<String>, seen: &HashMap<&str, i32>, alpha: f64) -> f64 {
    cats.iter()
        .map(|c| (1.0 - alpha).powi(*seen.get(c.as_str()).unwrap_or(&0)))
        .sum()
}

/// Discounted cumulative α-gain of `order` (already truncated to the cutoff).
pub fn alpha_dcg(order: &[&BTreeSet<String>], alpha: f64) -> f64 {
    let mut seen: HashMap<&str, i32> = HashMap::new();
    let mut total = 0.0;
    for (j, cats) in order.iter().enumerate() {
        total += novelty_gain(cats, &seen, alpha) * discount(j);
        for c in cats.iter() {
            *seen.entry(c.as_str()).or_default() += 1;
        }
    }
    total
}

/// DCG of the greedy reordering of `items`: each position takes the item
/// with the largest marginal gain, ties to the earlier item.
pub fn greedy_ideal_dcg(items: &[&BTreeSet<String>], alpha: f64) -> f64 {
    let mut remaining: Vec<&BTreeSet<String>> = items.to_vec();
    let mut seen: HashMap<&str, i32> = HashMap::new();
    let mut total = 0.0;
    let mut position = 0;
    while !remaining.is_empty() {
        let mut best = 0;
        let mut best_gain = f64::NEG_INFINITY;
        for (i, cats) in remaining.iter().enumerate() {
            let g = novelty_gain(cats, &seen, alpha);
            if g > best_gain {
                best = i;
                best_gain = g;
            }
        }
        let cats = remaining.remove(best);
        total += best_gain * discount(position);
        for c in cats.iter() {
            *seen.entry(c.as_str()).or_default() += 1;
        }
        position += 1;
    }
    total
}

fn resolve<'a>(list: &Ranking, categories: &'a CategoryMap, k: usize) -> Result<Vec<&'a BTreeSet<String>>, MetricError> {
    list.items
        .iter()
        .take(k)
        .map(|id| {
            categories
                .get(id)
                .filter(|c| !c.is_empty())
                .ok_or_else(|| MetricError::MissingCategories(id.clone()))
        })
        .collect()
}

/// α-NDCG@k of one list, normalised by the greedy-ideal order of its own
/// top-k items. An empty list scores 0.
pub fn alpha_ndcg(list: &Ranking, categories: &CategoryMap, params: AlphaNdcgParams) -> Result<f64, MetricError> {
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(MetricError::InvalidParam(format!("alpha {} outside [0, 1]", params.alpha)));
    }
    let top = resolve(list, categories, params.k)?;
    let ideal = greedy_ideal_dcg(&top, params.alpha);
    if ideal <= 0.0 {
        return Ok(0.0);
    }
    Ok((alpha_dcg(&top, params.alpha) / ideal).clamp(0.0, 1.0))
}

/// Mean α-NDCG@k over users.
pub fn mean_alpha_ndcg(
    lists: &BTreeMap<UserId, Ranking>,
    categories: &CategoryMap,
    params: AlphaNdcgParams,
) -> Result<f64, MetricError> {
    if lists.is_empty() {
        return Err(MetricError::NoUsers);
    }
    let mut total = 0.0;
    for list in lists.values() {
        total += alpha_ndcg(list, categories, params)?;
    }
    Ok(total / lists.len() as f64)
}
