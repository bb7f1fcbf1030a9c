//! Independent reference implementations shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use aspect_rerank::llm::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use aspect_rerank::prompt_format::parse_candidates;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for j in c..n {
                m[r][j] -= f * m[c][j];
            }
        }
    }
    d
}

fn submatrix(l: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| idx.iter().map(|&j| l[i][j]).collect()).collect()
}

/// Greedy MAP that recomputes every augmented determinant from scratch.
pub fn naive_dpp_greedy(l: &[Vec<f64>], k: usize, floor: f64) -> Vec<usize> {
    let n = l.len();
    let mut selected: Vec<usize> = Vec::new();
    let mut current = 1.0;
    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !selected.contains(i)) {
            let mut idx = selected.clone();
            idx.push(i);
            let gain = det(submatrix(l, &idx)) / current;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, gain) = best.unwrap();
        if gain <= floor {
            break;
        }
        selected.push(i);
        current = det(submatrix(l, &selected));
    }
    selected
}

pub fn log_det(l: &[Vec<f64>], idx: &[usize]) -> f64 {
    det(submatrix(l, idx)).ln()
}

/// `det(L_S) / det(L_{S minus its last item})`.
pub fn det_ratio(l: &[Vec<f64>], idx: &[usize]) -> f64 {
    det(submatrix(l, idx)) / det(submatrix(l, &idx[..idx.len() - 1]))
}

/// `B Bᵀ` for a random `n × m` matrix `B` with `m >= n`: PSD, full rank
/// with probability one.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let m = n + rng.random_range(0..3);
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| (0..m).map(|t| b[i][t] * b[j][t]).sum()).collect())
        .collect()
}

/// α-DCG of an order given as category sets.
pub fn alpha_dcg(order: &[&BTreeSet<String>], alpha: f64) -> f64 {
    let mut seen: HashMap<&str, i32> = HashMap::new();
    let mut total = 0.0;
    for (j, cats) in order.iter().enumerate() {
        let gain: f64 = cats.iter().map(|c| (1.0 - alpha).powi(*seen.get(c.as_str()).unwrap_or(&0))).sum();
        total += gain / ((j + 2) as f64).log2();
        for c in cats.iter() {
            *seen.entry(c.as_str()).or_default() += 1;
        }
    }
    total
}

/// Best α-DCG over every permutation.
pub fn exhaustive_alpha_ideal(items: &[&BTreeSet<String>], alpha: f64) -> f64 {
    fn go<'a>(rest: &mut Vec<&'a BTreeSet<String>>, acc: &mut Vec<&'a BTreeSet<String>>, alpha: f64, best: &mut f64) {
        if rest.is_empty() {
            *best = best.max(alpha_dcg(acc, alpha));
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            acc.push(x);
            go(rest, acc, alpha, best);
            acc.pop();
            rest.insert(i, x);
        }
    }
    let mut best = 0.0;
    go(&mut items.to_vec(), &mut Vec::new(), alpha, &mut best);
    best
}

/// Replies drawn at random: Backward-heavy next nodes, unknown names,
/// missing markers, duplicate and foreign ids.
pub struct AdversarialBackend {
    rng: Mutex<ChaCha8Rng>,
}

impl AdversarialBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

const NEXT_CHOICES: [&str; 12] = [
    "Backward", "Backward", "backward", "BACKWARD", "Accuracy", "Diversity", "Fairness", "Stop", "Novelty", "Bogus",
    "", "???",
];

impl ChatBackend for AdversarialBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let listed: Vec<String> = parse_candidates(&request.user_text()).into_iter().map(|(id, _)| id.to_string()).collect();
        let mut rng = self.rng.lock().unwrap();
        if rng.random_bool(0.05) {
            return Ok(ChatResponse::text("I cannot help with that."));
        }
        let next = NEXT_CHOICES[rng.random_range(0..NEXT_CHOICES.len())];
        let len = rng.random_range(0..=2 * listed.len().max(1));
        let ranking: Vec<String> = (0..len)
            .map(|_| {
                if listed.is_empty() || rng.random_bool(0.15) {
                    format!("zz{}", rng.random_range(0..5))
                } else {
                    listed[rng.random_range(0..listed.len())].clone()
                }
            })
            .collect();
        let mut reply = String::new();
        if rng.random_bool(0.9) {
            reply.push_str(&format!("NEXT: {next}\n"));
        }
        if rng.random_bool(0.9) {
            reply.push_str(&format!("RANKING: {}", ranking.join(",")));
        }
        if rng.random_bool(0.5) {
            reply = reply.lines().rev().collect::<Vec<_>>().join("\n");
        }
        Ok(ChatResponse::text(reply))
    }

    fn name(&self) -> &str {
        "adversarial"
    }
}
