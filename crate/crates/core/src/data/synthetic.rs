use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Interaction, InteractionLog};
use crate::llm::embed_marker;
use crate::types::{FeatureMap, Item, ItemCatalog, ItemId, User, UserId};

/// Feature holding the relevance marker of synthetic items.
pub const MARKER_FIELD: &str = "title";

const GENRES: [&str; 8] = [
    "Action", "Comedy", "Drama", "Horror", "Romance", "Sci-Fi", "Thriller", "Documentary",
];

/// Shape of a generated MovieLens-like dataset. Every user's last
/// interaction is a dedicated item whose marker (1.0) exceeds that of every
/// shared item (below 1.0), so sorting candidates by marker ranks the
/// held-out item first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub users: usize,
    pub shared_items: usize,
    pub interactions_per_user: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: 100,
            shared_items: 200,
            interactions_per_user: 8,
            seed: 0,
        }
    }
}

fn item(id: String, title: String, rng: &mut ChaCha8Rng) -> Result<Item, DataError> {
    let first = *GENRES.choose(rng).expect("non-empty");
    let genre = if rng.random_bool(0.3) {
        let second = *GENRES.choose(rng).expect("non-empty");
        if second == first { first.to_string() } else { format!("{first}|{second}") }
    } else {
        first.to_string()
    };
    let year = rng.random_range(1980..=2012).to_string();
    let features = FeatureMap::from_pairs([("title", title.as_str()), ("genre", &genre), ("year", &year)])?;
    Ok(Item::new(ItemId::new(id)?, features))
}

pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset, DataError> {
    if spec.interactions_per_user < 3 || spec.interactions_per_user > spec.shared_items + 1 {
        return Err(DataError::Config(format!(
            "interactions_per_user must lie in [3, shared_items + 1], got {}",
            spec.interactions_per_user
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = ItemCatalog::new();
    for j in 0..spec.shared_items {
        // markers in [0, 0.95), two decimals
        let marker = f64::from(rng.random_range(0..95u32)) / 100.0;
        items.insert(item(format!("i{j}"), embed_marker(&format!("Item {j}"), marker), &mut rng)?);
    }
    let shared: Vec<ItemId> = (0..spec.shared_items).map(|j| ItemId::new(format!("i{j}"))).collect::<Result<_, _>>()?;
    let mut users = std::collections::BTreeMap::new();
    let mut records = Vec::new();
    for u in 0..spec.users {
        let user = UserId::new(format!("u{u}"))?;
        let gender = if rng.random_bool(0.5) { "F" } else { "M" };
        let age = rng.random_range(18..=60).to_string();
        users.insert(user.clone(), User::new(user.clone(), FeatureMap::from_pairs([("gender", gender), ("age", &age)])?));
        let history: Vec<&ItemId> = shared.choose_multiple(&mut rng, spec.interactions_per_user - 1).collect();
        for (t, id) in history.into_iter().enumerate() {
            records.push(Interaction {
                user: user.clone(),
                item: id.clone(),
                timestamp: t as i64 + 1,
                label: None,
            });
        }
        let target = format!("t{u}");
        items.insert(item(target.clone(), embed_marker(&format!("Target {u}"), 1.0), &mut rng)?);
        records.push(Interaction {
            user: user.clone(),
            item: ItemId::new(target)?,
            timestamp: spec.interactions_per_user as i64,
            label: None,
        });
    }
    Ok(Dataset {
        users,
        items,
        log: InteractionLog { records },
    })
}
