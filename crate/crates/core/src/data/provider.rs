use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compare_ids, DataError, Dataset, Split, MARKER_FIELD};
use crate::llm::extract_marker;
use crate::types::{linear_scores, CandidateList, ItemId, UserId};

/// Field separator of precomputed candidate files.
pub const PRECOMPUTED_SEPARATOR: char = '\t';

/// How candidate lists are produced for each test user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CandidateProvider {
    /// One line per user: `user_id<TAB>id,id,...[<TAB>score,score,...]`.
    PrecomputedFile { path: PathBuf },
    /// Most-interacted training items the user has not consumed, with the
    /// held-out item injected at a seeded position.
    Popularity,
    /// The held-out item plus seeded distractors carrying lower relevance
    /// markers, in seeded order.
    MarkerSynthetic,
}

type Row = (Vec<ItemId>, Option<Vec<f64>>);

/// A provider with its lookup tables built.
#[derive(Debug, Clone)]
pub enum Provider {
    Precomputed {
        rows: HashMap<UserId, Row>,
    },
    Popularity {
        ranked: Vec<ItemId>,
        consumed: HashMap<UserId, HashSet<ItemId>>,
        held_out: BTreeMap<UserId, ItemId>,
        seed: u64,
    },
    MarkerSynthetic {
        /// Items with a marker, ascending by marker then id.
        marked: Vec<(ItemId, f64)>,
        consumed: HashMap<UserId, HashSet<ItemId>>,
        held_out: BTreeMap<UserId, ItemId>,
        seed: u64,
    },
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

/// Per-user generator: stable across runs and independent of user order.
fn user_rng(seed: u64, user: &UserId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(user.as_str().as_bytes()))
}

fn consumed_items(dataset: &Dataset) -> HashMap<UserId, HashSet<ItemId>> {
    let mut consumed: HashMap<UserId, HashSet<ItemId>> = HashMap::new();
    for r in &dataset.log.records {
        consumed.entry(r.user.clone()).or_default().insert(r.item.clone());
    }
    consumed
}

fn linear_candidates(user: &UserId, items: Vec<ItemId>) -> Result<CandidateList, DataError> {
    let scores = linear_scores(items.len())?;
    Ok(CandidateList::new(user.clone(), items, Some(scores))?)
}

impl Provider {
    pub fn build(config: &CandidateProvider, dataset: &Dataset, split: &Split, seed: u64) -> Result<Self, DataError> {
        let held_out = split.ground_truth();
        match config {
            CandidateProvider::PrecomputedFile { path } => Ok(Self::Precomputed {
                rows: read_precomputed(path)?,
            }),
            CandidateProvider::Popularity => {
                let mut counts: HashMap<&ItemId, usize> = HashMap::new();
                for r in split.train.values().flatten() {
                    *counts.entry(&r.item).or_default() += 1;
                }
                let mut ranked: Vec<(&ItemId, usize)> = counts.into_iter().collect();
                ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| compare_ids(a.0.as_str(), b.0.as_str())));
                Ok(Self::Popularity {
                    ranked: ranked.into_iter().map(|(id, _)| id.clone()).collect(),
                    consumed: consumed_items(dataset),
                    held_out,
                    seed,
                })
            }
            CandidateProvider::MarkerSynthetic => {
                let mut marked: Vec<(ItemId, f64)> = dataset
                    .items
                    .iter()
                    .filter_map(|item| {
                        let m = extract_marker(item.features.get(MARKER_FIELD)?)?;
                        Some((item.id.clone(), m))
                    })
                    .collect();
                if marked.is_empty() {
                    return Err(DataError::Config(format!(
                        "marker-synthetic provider needs items with a marker in their {MARKER_FIELD:?} field"
                    )));
                }
                marked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| compare_ids(a.0.as_str(), b.0.as_str())));
                Ok(Self::MarkerSynthetic {
                    marked,
                    consumed: consumed_items(dataset),
                    held_out,
                    seed,
                })
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Precomputed { .. } => "precomputed-file",
            Self::Popularity { .. } => "popularity",
            Self::MarkerSynthetic { .. } => "marker-synthetic",
        }
    }

    /// The candidate list of `user`, `n` items long.
    pub fn provide(&self, user: &UserId, n: usize) -> Result<CandidateList, DataError> {
        if n == 0 {
            return Err(DataError::Config("candidate count must be at least 1".into()));
        }
        let short = |available| DataError::NotEnoughCandidates {
            user: user.clone(),
            wanted: n,
            available,
        };
        match self {
            Self::Precomputed { rows } => {
                let (items, scores) = rows.get(user).ok_or_else(|| DataError::UnknownUser(user.clone()))?;
                if items.len() < n {
                    return Err(short(items.len()));
                }
                let scores = scores.as_ref().map(|s| s[..n].to_vec());
                Ok(CandidateList::new(user.clone(), items[..n].to_vec(), scores)?)
            }
            Self::Popularity {
                ranked,
                consumed,
                held_out,
                seed,
            } => {
                let target = held_out.get(user).ok_or_else(|| DataError::UnknownUser(user.clone()))?;
                let empty = HashSet::new();
                let seen = consumed.get(user).unwrap_or(&empty);
                let mut items: Vec<ItemId> = ranked
                    .iter()
                    .filter(|id| !seen.contains(*id) && *id != target)
                    .take(n - 1)
                    .cloned()
                    .collect();
                if items.len() < n - 1 {
                    return Err(short(items.len() + 1));
                }
                let position = user_rng(*seed, user).random_range(0..n);
                items.insert(position, target.clone());
                linear_candidates(user, items)
            }
            Self::MarkerSynthetic {
                marked,
                consumed,
                held_out,
                seed,
            } => {
                let target = held_out.get(user).ok_or_else(|| DataError::UnknownUser(user.clone()))?;
                let target_marker = marked
                    .iter()
                    .find(|(id, _)| id == target)
                    .map(|(_, m)| *m)
                    .ok_or_else(|| DataError::Config(format!("held-out item {target} of user {user} carries no marker")))?;
                let empty = HashSet::new();
                let seen = consumed.get(user).unwrap_or(&empty);
                let mut pool: Vec<&ItemId> = marked
                    .iter()
                    .filter(|(id, m)| *m < target_marker && !seen.contains(id))
                    .map(|(id, _)| id)
                    .collect();
                if pool.len() < n - 1 {
                    return Err(short(pool.len() + 1));
                }
                let mut rng = user_rng(*seed, user);
                pool.shuffle(&mut rng);
                let mut items: Vec<ItemId> = pool.into_iter().take(n - 1).cloned().collect();
                let position = rng.random_range(0..n);
                items.insert(position, target.clone());
                linear_candidates(user, items)
            }
        }
    }
}

fn read_precomputed(path: &Path) -> Result<HashMap<UserId, Row>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut rows = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let row_error = |message: String| DataError::Row {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let mut fields = line.split(PRECOMPUTED_SEPARATOR);
        let user: UserId = fields
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e: crate::types::TypeError| row_error(e.to_string()))?;
        let items = fields
            .next()
            .ok_or_else(|| row_error("missing item list".into()))?
            .split(',')
            .map(|s| s.trim().parse::<ItemId>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| row_error(e.to_string()))?;
        let scores = fields
            .next()
            .map(|s| {
                s.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| row_error(format!("unparseable score {v:?}"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        if fields.next().is_some() {
            return Err(row_error("expected at most three tab-separated fields".into()));
        }
        // validates duplicates and score length
        CandidateList::new(user.clone(), items.clone(), scores.clone()).map_err(|e| row_error(e.to_string()))?;
        if rows.insert(user.clone(), (items, scores)).is_some() {
            return Err(row_error(format!("duplicate row for user {user}")));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{leave_one_out, synthetic_dataset, SyntheticSpec};
    use std::io::Write;

    #[test]
    fn precomputed_passthrough() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "u1\ti5,i9,i2").unwrap();
        writeln!(f, "u2\ta,b\t0.9,0.1").unwrap();
        let p = Provider::Precomputed {
            rows: read_precomputed(f.path()).unwrap(),
        };
        let u1 = UserId::new("u1").unwrap();
        assert_eq!(p.provide(&u1, 3).unwrap().items().len(), 3);
        assert_eq!(p.provide(&u1, 2).unwrap().items()[1].as_str(), "i9");
        assert!(matches!(p.provide(&u1, 4), Err(DataError::NotEnoughCandidates { .. })));
        assert_eq!(p.provide(&UserId::new("u2").unwrap(), 2).unwrap().scores(), Some(&[0.9, 0.1][..]));
        assert!(matches!(p.provide(&UserId::new("zz").unwrap(), 1), Err(DataError::UnknownUser(_))));
    }

    #[test]
    fn precomputed_rejects_duplicates() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "u1\ta,a").unwrap();
        assert!(matches!(read_precomputed(f.path()), Err(DataError::Row { line: 1, .. })));
    }

    fn synthetic() -> (Dataset, Split) {
        let d = synthetic_dataset(&SyntheticSpec {
            users: 20,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let s = leave_one_out(&d.log).unwrap();
        (d, s)
    }

    #[test]
    fn popularity_injects_target_once() {
        let (d, s) = synthetic();
        let p = Provider::build(&CandidateProvider::Popularity, &d, &s, 7).unwrap();
        for (user, target) in s.ground_truth() {
            let c = p.provide(&user, 20).unwrap();
            assert_eq!(c.len(), 20);
            assert_eq!(c.items().iter().filter(|i| **i == target).count(), 1);
        }
    }

    #[test]
    fn marker_provider_is_seeded() {
        let (d, s) = synthetic();
        let a = Provider::build(&CandidateProvider::MarkerSynthetic, &d, &s, 3).unwrap();
        let b = Provider::build(&CandidateProvider::MarkerSynthetic, &d, &s, 3).unwrap();
        let c = Provider::build(&CandidateProvider::MarkerSynthetic, &d, &s, 4).unwrap();
        let truth = s.ground_truth();
        let user = truth.keys().next().unwrap();
        assert_eq!(a.provide(user, 20).unwrap(), b.provide(user, 20).unwrap());
        assert_ne!(a.provide(user, 20).unwrap(), c.provide(user, 20).unwrap());
        assert!(a.provide(user, 20).unwrap().contains(&truth[user]));
    }
}
