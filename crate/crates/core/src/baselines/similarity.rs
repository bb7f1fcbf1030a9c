use std::collections::BTreeSet;

use super::BaselineError;
use crate::types::Item;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Symmetric item-item similarity with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, BaselineError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(BaselineError::NotSquare);
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let m = Self { n, data };
        for i in 0..n {
            if (m.get(i, i) - 1.0).abs() > SYMMETRY_TOLERANCE {
                return Err(BaselineError::InvalidSimilarity(format!("diagonal entry {i} is {}", m.get(i, i))));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(BaselineError::InvalidSimilarity(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
                }
                if (v - m.get(j, i)).abs() > SYMMETRY_TOLERANCE {
                    return Err(BaselineError::NotSymmetric(i, j));
                }
            }
        }
        Ok(m)
    }

    /// Builds from the upper triangle; `f(i, j)` is called for `i < j` only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, BaselineError> {
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i][i] = 1.0;
            for j in i + 1..n {
                let v = f(i, j);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        Self::new(rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0).expect("identity is a valid similarity")
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

fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Jaccard similarity of the items' category sets for `attr`.
pub fn feature_similarity(items: &[&Item], attr: &str, delimiter: &str) -> Result<SimilarityMatrix, BaselineError> {
    let sets = items
        .iter()
        .map(|item| {
            let raw = item.features.get(attr).ok_or_else(|| BaselineError::MissingAttribute {
                item: item.id.clone(),
                attr: attr.to_string(),
            })?;
            Ok(raw.split(delimiter).map(str::trim).filter(|c| !c.is_empty()).collect())
        })
        .collect::<Result<Vec<BTreeSet<&str>>, BaselineError>>()?;
    SimilarityMatrix::from_fn(sets.len(), |i, j| jaccard(&sets[i], &sets[j]))
}
