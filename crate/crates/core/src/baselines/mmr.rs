use serde::{Deserialize, Serialize};

use super::{BaselineError, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmrParams {
    pub lambda: f64,
    pub k: usize,
}

/// Greedy MMR selection. Returns candidate indices; at most `min(k, n)`.
pub fn mmr_rerank(relevance: &[f64], sim: &SimilarityMatrix, params: MmrParams) -> Result<Vec<usize>, BaselineError> {
    if !(0.0..=1.0).contains(&params.lambda) {
        return Err(BaselineError::InvalidParam(format!("lambda {} outside [0, 1]", params.lambda)));
    }
    let n = relevance.len();
    if sim.len() != n {
        return Err(BaselineError::DimensionMismatch { expected: n, got: sim.len() });
    }
    let lambda = params.lambda;
    let mut selected: Vec<usize> = Vec::with_capacity(params.k.min(n));
    // max similarity of each item to the selected set
    let mut redundancy = vec![0.0f64; n];
    let mut taken = vec![false; n];
    while selected.len() < params.k.min(n) {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let score = if selected.is_empty() {
                lambda * relevance[i]
            } else {
                lambda * relevance[i] - (1.0 - lambda) * redundancy[i]
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (pick, _) = best.expect("an unselected item remains");
        taken[pick] = true;
        selected.push(pick);
        for (i, r) in redundancy.iter_mut().enumerate() {
            *r = r.max(sim.get(i, pick));
        }
    }
    Ok(selected)
}
