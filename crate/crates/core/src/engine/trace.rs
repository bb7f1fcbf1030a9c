use serde::{Deserialize, Serialize};

use super::{RerankOutput, StopReason};
use crate::nodes::{NodeId, NodeOutcome, ReplyError};
use crate::types::{Goal, Ranking, UserId};

/// One node visit as it happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node: NodeId,
    /// `None` when the reply named no registered node.
    pub next: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ranking: Option<Ranking>,
    /// Node whose ranking this Backward visit removed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub popped: Option<NodeId>,
    pub raw_reply: String,
}

impl TraceStep {
    pub(super) fn from_outcome(
        node: &NodeId,
        outcome: &Result<NodeOutcome, ReplyError>,
        popped: Option<NodeId>,
    ) -> Self {
        match outcome {
            Ok(o) => Self {
                node: node.clone(),
                next: Some(o.next.clone()),
                ranking: o.ranking.clone(),
                popped,
                raw_reply: o.raw_reply.clone(),
            },
            Err(ReplyError::UnparseableNext { ranking, raw_reply }) => Self {
                node: node.clone(),
                next: None,
                ranking: ranking.clone(),
                popped,
                raw_reply: raw_reply.clone(),
            },
        }
    }
}

/// One line of `trace.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub user_id: UserId,
    pub goal: Goal,
    pub path_signature: String,
    pub path: Vec<NodeId>,
    pub stop_reason: StopReason,
    #[serde(rename = "final")]
    pub final_ranking: Ranking,
    pub steps: Vec<TraceStep>,
}

impl TraceRecord {
    pub fn new(user_id: &UserId, goal: &Goal, output: &RerankOutput) -> Self {
        Self {
            user_id: user_id.clone(),
            goal: goal.clone(),
            path_signature: output.path_signature(),
            path: output.path.clone(),
            stop_reason: output.stop_reason,
            final_ranking: output.final_ranking.clone(),
            steps: output.trace.clone(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

/// Hyphen-joined node initials, e.g. `A-A-B-D`.
pub fn path_signature(path: &[NodeId]) -> String {
    path.iter()
        .map(|n| n.initial().to_string())
        .collect::<Vec<_>>()
        .join("-")
}
