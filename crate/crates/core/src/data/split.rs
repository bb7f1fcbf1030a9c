use std::collections::BTreeMap;

use super::{compare_ids, DataError, Interaction, InteractionLog};
use crate::metrics::GroundTruth;
use crate::types::UserId;

/// Per-user leave-one-out partition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: BTreeMap<UserId, Vec<Interaction>>,
    pub validation: BTreeMap<UserId, Interaction>,
    pub test: BTreeMap<UserId, Interaction>,
}

impl Split {
    pub fn ground_truth(&self) -> GroundTruth {
        self.test.iter().map(|(u, i)| (u.clone(), i.item.clone())).collect()
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.test.keys()
    }
}

/// Last interaction by time goes to test, the one before to validation,
/// the rest to train. Equal timestamps order by item id, so the larger id
/// is held out.
pub fn leave_one_out(log: &InteractionLog) -> Result<Split, DataError> {
    let mut split = Split::default();
    for (user, mut records) in log.by_user() {
        if records.len() < 3 {
            return Err(DataError::TooFewInteractions {
                user: user.clone(),
                count: records.len(),
            });
        }
        records.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| compare_ids(a.item.as_str(), b.item.as_str()))
        });
        let test = records.pop().expect("at least three records");
        let validation = records.pop().expect("at least two records");
        split.test.insert(user.clone(), test.clone());
        split.validation.insert(user.clone(), validation.clone());
        split.train.insert(user.clone(), records.into_iter().cloned().collect());
    }
    Ok(split)
}
