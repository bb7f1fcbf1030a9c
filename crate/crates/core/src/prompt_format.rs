//! Text layout of the placeholder expansions inside rendered prompts.
//!
//! Rendering lives in `nodes`; the parsing half is here so that the
//! rule-based mock backend can read a prompt the same way a model would,
//! without depending on the node registry.

use crate::types::{FeatureMap, ItemCatalog, ItemId, Ranking};

pub const GOAL_PREFIX: &str = "Goal:";
pub const HISTORY_HEADER: &str = "Historical reranking results (oldest first):";
pub const NO_GOAL: &str = "no specific focus";
pub const NO_USER_FEATURES: &str = "no user features available";

/// One `[id] name: value; ...` line per candidate, in candidate order.
pub fn candidate_block<'a>(ids: impl IntoIterator<Item = &'a ItemId>, catalog: &ItemCatalog) -> String {
    ids.into_iter()
        .map(|id| match catalog.get(id) {
            Some(item) if !item.features.is_empty() => {
                format!("[{id}] {}", item.features.describe())
            }
            _ => format!("[{id}]"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn user_block(features: &FeatureMap) -> String {
    if features.is_empty() {
        NO_USER_FEATURES.to_string()
    } else {
        features.describe()
    }
}

pub fn goal_text(goal: &str) -> &str {
    if goal.trim().is_empty() {
        NO_GOAL
    } else {
        goal.trim()
    }
}

/// Empty string for an empty pool, otherwise a header followed by one
/// `Step n (Node): id,id,...` line per entry.
pub fn history_block<'a>(entries: impl IntoIterator<Item = (&'a str, &'a Ranking)>) -> String {
    let lines: Vec<String> = entries
        .into_iter()
        .enumerate()
        .map(|(i, (node, ranking))| format!("Step {} ({node}): {}", i + 1, ranking.joined()))
        .collect();
    if lines.is_empty() {
        String::new()
    } else {
        format!("{HISTORY_HEADER}\n{}", lines.join("\n"))
    }
}

/// Candidate lines found in a prompt: `(id, description)` in listed order.
pub fn parse_candidates(prompt: &str) -> Vec<(ItemId, String)> {
    prompt
        .lines()
        .filter_map(|line| {
            let rest = line.trim_start().strip_prefix('[')?;
            let end = rest.find(']')?;
            let id = ItemId::new(&rest[..end]).ok()?;
            Some((id, rest[end + 1..].trim().to_string()))
        })
        .collect()
}

/// Node names of the history entries in a prompt, oldest first.
pub fn parse_history_nodes(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .filter_map(|line| {
            let rest = line.trim_start().strip_prefix("Step ")?;
            let open = rest.find('(')?;
            let close = rest[open..].find(')')? + open;
            rest[..open]
                .trim()
                .parse::<usize>()
                .ok()
                .map(|_| rest[open + 1..close].to_string())
        })
        .collect()
}

pub fn parse_goal(prompt: &str) -> Option<String> {
    prompt.lines().find_map(|line| {
        line.trim_start()
            .strip_prefix(GOAL_PREFIX)
            .map(|g| g.trim().to_string())
    })
}
