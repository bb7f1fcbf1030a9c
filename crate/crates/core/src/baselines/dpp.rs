use nalgebra::DMatrix;

use super::{BaselineError, SimilarityMatrix};

/// Smallest eigenvalue still accepted as PSD.
pub const PSD_TOLERANCE: f64 = -1e-10;
/// Marginal gains at or below this stop the greedy selection.
pub const GAIN_FLOOR: f64 = 1e-12;

const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Symmetric positive-semidefinite DPP kernel `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct DppKernel {
    n: usize,
    data: Vec<f64>,
}

impl DppKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, BaselineError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(BaselineError::NotSquare);
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(BaselineError::InvalidParam(format!("kernel entry {v} is not finite")));
        }
        let kernel = Self { n, data };
        for i in 0..n {
            for j in i + 1..n {
                if (kernel.get(i, j) - kernel.get(j, i)).abs() > SYMMETRY_TOLERANCE {
                    return Err(BaselineError::NotSymmetric(i, j));
                }
            }
        }
        if n > 0 {
            let m = DMatrix::from_row_slice(n, n, &kernel.data);
            let min = m.symmetric_eigenvalues().min();
            if min < PSD_TOLERANCE {
                return Err(BaselineError::NotPsd(min));
            }
        }
        Ok(kernel)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// `L_ij = rel_i * sim_ij * rel_j`.
pub fn quality_diversity_kernel(relevance: &[f64], sim: &SimilarityMatrix) -> Result<DppKernel, BaselineError> {
    let n = relevance.len();
    if sim.len() != n {
        return Err(BaselineError::DimensionMismatch { expected: n, got: sim.len() });
    }
    let rows = (0..n)
        .map(|i| (0..n).map(|j| relevance[i] * sim.get(i, j) * relevance[j]).collect())
        .collect();
    DppKernel::new(rows)
}

/// Greedy MAP inference with incremental Cholesky updates: each step
/// adds the item with the largest log-det gain, ties to the lower index.
/// May return fewer than `k` items when every remaining gain falls to the
/// numerical floor.
pub fn dpp_greedy_map(kernel: &DppKernel, k: usize) -> Result<Vec<usize>, BaselineError> {
    let n = kernel.len();
    if k > n {
        return Err(BaselineError::KTooLarge { k, n });
    }
    // d2[i]: conditional variance of i given the selected set
    let mut d2: Vec<f64> = (0..n).map(|i| kernel.get(i, i)).collect();
    // c[i]: row i of the Cholesky factor restricted to selected columns
    let mut c: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            if best.is_none_or(|(_, g)| d2[i] > g) {
                best = Some((i, d2[i]));
            }
        }
        let (j, gain) = best.expect("k <= n leaves an unselected item");
        if gain <= GAIN_FLOOR {
            log::warn!(
                "DPP greedy MAP stopped early after {} of {k} items: remaining gains below {GAIN_FLOOR:e}",
                selected.len()
            );
            break;
        }
        taken[j] = true;
        selected.push(j);
        let dj = gain.sqrt();
        let cj = c[j].clone();
        for i in (0..n).filter(|&i| !taken[i]) {
            let dot: f64 = cj.iter().zip(&c[i]).map(|(a, b)| a * b).sum();
            let e = (kernel.get(j, i) - dot) / dj;
            c[i].push(e);
            d2[i] -= e * e;
        }
    }
    Ok(selected)
}
