//! Classical rerankers: maximal marginal relevance, greedy DPP MAP
//! inference, and a plain score sort.

mod dpp;
mod mmr;
mod similarity;

use thiserror::Error;

use crate::types::{CandidateList, ItemId, Ranking};

pub use dpp::{dpp_greedy_map, quality_diversity_kernel, DppKernel, GAIN_FLOOR, PSD_TOLERANCE};
pub use mmr::{mmr_rerank, MmrParams};
pub use similarity::{feature_similarity, SimilarityMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("kernel is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid similarity matrix: {0}")]
    InvalidSimilarity(String),
    #[error("k = {k} exceeds the {n} available items")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("candidate list for user {0} carries no scores")]
    MissingScores(String),
    #[error("item {item} lacks attribute {attr}")]
    MissingAttribute { item: ItemId, attr: String },
}

/// Stable descending sort by upstream score, truncated to `k`.
pub fn score_sort(candidates: &CandidateList, k: usize) -> Result<Ranking, BaselineError> {
    let scores = candidates
        .scores()
        .ok_or_else(|| BaselineError::MissingScores(candidates.user_id().to_string()))?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order.into_iter().take(k).map(|i| candidates.items()[i].clone()).collect())
}

/// Maps candidate indices back to ids.
pub fn indices_to_ranking(candidates: &CandidateList, picks: &[usize]) -> Ranking {
    picks.iter().map(|&i| candidates.items()[i].clone()).collect()
}
