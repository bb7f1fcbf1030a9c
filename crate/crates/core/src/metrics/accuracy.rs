use std::collections::BTreeMap;

use super::{GroundTruth, MetricError};
use crate::types::{Ranking, UserId};

/// 1-based rank of each user's held-out item within the top `k`, or `None`.
fn hit_ranks<'a>(
    lists: &'a BTreeMap<UserId, Ranking>,
    truth: &'a GroundTruth,
    k: usize,
) -> Result<Vec<Option<usize>>, MetricError> {
    if truth.is_empty() {
        return Err(MetricError::NoUsers);
    }
    truth
        .iter()
        .map(|(user, target)| {
            let list = lists
                .get(user)
                .ok_or_else(|| MetricError::MissingUser(user.clone()))?;
            Ok(list.rank_of(target).filter(|&r| r <= k))
        })
        .collect()
}

/// Fraction of users whose held-out item is in their top `k`.
pub fn hit_ratio(
    lists: &BTreeMap<UserId, Ranking>,
    truth: &GroundTruth,
    k: usize,
) -> Result<f64, MetricError> {
    let ranks = hit_ranks(lists, truth, k)?;
    Ok(ranks.iter().filter(|r| r.is_some()).count() as f64 / ranks.len() as f64)
}

/// Leave-one-out NDCG: one relevant item, so the ideal DCG is 1 and a hit at
/// rank `r` scores `1 / log2(1 + r)`.
pub fn ndcg(
    lists: &BTreeMap<UserId, Ranking>,
    truth: &GroundTruth,
    k: usize,
) -> Result<f64, MetricError> {
    let ranks = hit_ranks(lists, truth, k)?;
    let total: f64 = ranks
        .iter()
        .map(|r| r.map_or(0.0, |r| 1.0 / (1.0 + r as f64).log2()))
        .sum();
    Ok(total / ranks.len() as f64)
}
