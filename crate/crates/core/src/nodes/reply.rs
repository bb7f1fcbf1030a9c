//! Reply grammar: a `NEXT: <node>` line and, for aspect nodes, a
//! `RANKING: id,id,...` line. Both markers are matched case-insensitively.

use std::collections::HashSet;

use thiserror::Error;

use super::{NodeId, NodeKind, NodeRegistry};
use crate::types::{CandidateList, ItemId, Ranking};

pub const NEXT_MARKER: &str = "NEXT:";
pub const RANKING_MARKER: &str = "RANKING:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeOutcome {
    pub next: NodeId,
    /// Present for aspect nodes (always a full permutation of the
    /// candidates), absent for Backward.
    pub ranking: Option<Ranking>,
    pub raw_reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplyError {
    /// No registered node name follows `NEXT:`. The ranking the reply did
    /// carry (repaired) is kept so the engine can still record the step.
    #[error("no registered node name after NEXT: in reply")]
    UnparseableNext {
        ranking: Option<Ranking>,
        raw_reply: String,
    },
}

/// Byte offset just past the first case-insensitive occurrence of `marker`.
fn after_marker(text: &str, marker: &str) -> Option<usize> {
    let n = marker.len();
    text.char_indices()
        .map(|(i, _)| i)
        .find(|&i| {
            text.get(i..i + n)
                .is_some_and(|w| w.eq_ignore_ascii_case(marker))
        })
        .map(|i| i + n)
}

fn next_token(reply: &str) -> Option<&str> {
    let start = after_marker(reply, NEXT_MARKER)?;
    let rest = reply[start..].trim_start_matches(|c: char| !c.is_alphanumeric());
    let len = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
        .unwrap_or(rest.len());
    let token = rest[..len].trim_end_matches('-');
    (!token.is_empty()).then_some(token)
}

fn ranking_ids(reply: &str) -> Vec<ItemId> {
    let Some(start) = after_marker(reply, RANKING_MARKER) else {
        return Vec::new();
    };
    let rest = &reply[start..];
    let mut lines = rest.lines();
    let mut segment = lines.next().unwrap_or("");
    if segment.trim().is_empty() {
        segment = lines.find(|l| !l.trim().is_empty()).unwrap_or("");
    }
    // "RANKING: a,b NEXT: Stop" on one line
    if let Some(cut) = after_marker(segment, NEXT_MARKER) {
        segment = &segment[..cut - NEXT_MARKER.len()];
    }
    segment
        .split(|c: char| c == ',' || c.is_whitespace())
        .map(|tok| tok.trim_matches(|c: char| "[]()<>\"'`*.;:".contains(c)))
        .filter_map(|tok| ItemId::new(tok).ok())
        .collect()
}

/// Deduplicates keeping first occurrences, drops ids outside `candidates`,
/// then appends missing candidates in their original order. Always returns a
/// permutation of the candidates.
pub fn repair_ranking(raw_ids: &[ItemId], candidates: &CandidateList) -> Ranking {
    let allowed: HashSet<&ItemId> = candidates.items().iter().collect();
    let mut seen = HashSet::with_capacity(candidates.len());
    let mut out = Vec::with_capacity(candidates.len());
    for id in raw_ids {
        if allowed.contains(id) && seen.insert(id) {
            out.push(id.clone());
        }
    }
    for id in candidates.items() {
        if seen.insert(id) {
            out.push(id.clone());
        }
    }
    Ranking::new(out)
}

/// Parses the reply produced at node `current`.
pub fn parse_reply(
    reply: &str,
    current: &NodeId,
    candidates: &CandidateList,
    registry: &NodeRegistry,
) -> Result<NodeOutcome, ReplyError> {
    let ranking = match registry.kind(current) {
        Some(NodeKind::Aspect) => Some(repair_ranking(&ranking_ids(reply), candidates)),
        _ => None,
    };
    match next_token(reply).and_then(|t| registry.resolve(t)) {
        Some(next) => Ok(NodeOutcome {
            next: next.clone(),
            ranking,
            raw_reply: reply.to_string(),
        }),
        None => Err(ReplyError::UnparseableNext {
            ranking,
            raw_reply: reply.to_string(),
        }),
    }
}
