//! The automatic reranking loop.
//!
//! A run starts at Accuracy and repeatedly renders the current node's prompt,
//! asks the backend, parses the reply and applies it: aspect nodes push their
//! ranking onto the history pool, Backward pops the latest entry. The run ends
//! when the model picks Stop, when `max_count` aspect visits have happened
//! (Backward visits are not counted), when `hard_cap` total visits have
//! happened, or when a reply names no registered node. The result is the
//! top-K prefix of the last pool entry.

mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{BackendError, ChatBackend, GenerationParams};
use crate::nodes::{self, NodeError, NodeId, NodeKind, NodeOutcome, NodeRegistry, ReplyError};
use crate::types::{Ranking, RerankInput};

pub use trace::{path_signature, TraceRecord, TraceStep};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankStep {
    pub node: NodeId,
    pub ranking: Ranking,
    pub raw_reply: String,
}

/// Stack of per-node rankings, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HistoryPool {
    steps: Vec<RerankStep>,
}

impl HistoryPool {
    pub fn push(&mut self, step: RerankStep) {
        self.steps.push(step);
    }

    pub fn pop(&mut self) -> Option<RerankStep> {
        self.steps.pop()
    }

    pub fn last(&self) -> Option<&RerankStep> {
        self.steps.last()
    }

    pub fn steps(&self) -> &[RerankStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Length K of the final list.
    pub k: usize,
    /// Aspect-node visit budget (MC).
    pub max_count: usize,
    /// Absolute visit limit including Backward; defaults to `3 * max_count + 1`.
    pub hard_cap: Option<usize>,
    /// Re-asks after a reply with no recognisable next node, before the
    /// fail-safe stops the run.
    pub unparseable_retries: u32,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k: 10,
            max_count: 5,
            hard_cap: None,
            unparseable_retries: 0,
        }
    }
}

impl GraphConfig {
    pub fn with_k(k: usize, max_count: usize) -> Self {
        Self {
            k,
            max_count,
            ..Self::default()
        }
    }

    /// Every run starts here.
    pub fn start(&self) -> NodeId {
        NodeId::accuracy()
    }

    pub fn hard_cap(&self) -> usize {
        self.hard_cap.unwrap_or(3 * self.max_count + 1)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.k == 0 {
            return Err(EngineError::Config("k must be at least 1".into()));
        }
        if self.max_count == 0 {
            return Err(EngineError::Config("max_count must be at least 1".into()));
        }
        if self.hard_cap() < self.max_count {
            return Err(EngineError::Config(format!(
                "hard_cap {} is below max_count {}",
                self.hard_cap(),
                self.max_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    StopNode,
    McReached,
    HardCap,
    FailSafe,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::StopNode => "stop-node",
            StopReason::McReached => "mc-reached",
            StopReason::HardCap => "hard-cap",
            StopReason::FailSafe => "fail-safe",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineState {
    pub current: NodeId,
    /// Aspect-node visits so far.
    pub nc: usize,
    pub total_visits: usize,
    pub pool: HistoryPool,
    /// Set when a reply named no registered node.
    pub fail_safe: bool,
}

impl EngineState {
    pub fn new(start: NodeId) -> Self {
        Self {
            current: start,
            nc: 0,
            total_visits: 0,
            pool: HistoryPool::default(),
            fail_safe: false,
        }
    }
}

/// Applies one visit of `state.current` (of the given kind) to the state.
///
/// Aspect visits push their ranking and count towards `nc`. A Backward visit
/// pops the latest entry unless only one is left. An unparseable next node
/// still records the aspect ranking the reply carried, then routes to Stop.
pub fn apply_outcome(
    mut state: EngineState,
    kind: NodeKind,
    outcome: &Result<NodeOutcome, ReplyError>,
) -> EngineState {
    let (ranking, raw_reply, next) = match outcome {
        Ok(o) => (o.ranking.as_ref(), &o.raw_reply, Some(&o.next)),
        Err(ReplyError::UnparseableNext { ranking, raw_reply }) => (ranking.as_ref(), raw_reply, None),
    };
    state.total_visits += 1;
    match kind {
        NodeKind::Aspect => {
            if let Some(ranking) = ranking {
                state.pool.push(RerankStep {
                    node: state.current.clone(),
                    ranking: ranking.clone(),
                    raw_reply: raw_reply.clone(),
                });
                state.nc += 1;
            }
        }
        NodeKind::Backward => {
            if state.pool.len() >= 2 {
                state.pool.pop();
            }
        }
        NodeKind::Stop => {}
    }
    match next {
        Some(next) => state.current = next.clone(),
        None => {
            state.current = NodeId::stop();
            state.fail_safe = true;
        }
    }
    state
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankOutput {
    /// Top `min(K, N)` of the last pool entry.
    pub final_ranking: Ranking,
    /// Visited nodes in order, Stop excluded.
    pub path: Vec<NodeId>,
    /// Every visit, including those whose ranking was later popped.
    pub trace: Vec<TraceStep>,
    pub stop_reason: StopReason,
    pub pool: HistoryPool,
}

impl RerankOutput {
    pub fn path_signature(&self) -> String {
        path_signature(&self.path)
    }
}

/// What a run had done when the backend failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialRun {
    pub path: Vec<NodeId>,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid graph config: {0}")]
    Config(String),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error("backend failed at {} after {} visit(s): {source}", .partial.path.last().map(NodeId::as_str).unwrap_or("?"), .partial.trace.len())]
    Backend {
        #[source]
        source: BackendError,
        partial: Box<PartialRun>,
    },
}

/// Runs one traversal for one user.
pub fn run_rerank(
    input: &RerankInput<'_>,
    registry: &NodeRegistry,
    config: &GraphConfig,
    backend: &dyn ChatBackend,
    params: &GenerationParams,
) -> Result<RerankOutput, EngineError> {
    config.validate()?;
    let start = config.start();
    if registry.kind(&start) != Some(NodeKind::Aspect) {
        return Err(EngineError::Config(format!("start node {start} is not a registered aspect node")));
    }
    let hard_cap = config.hard_cap();
    let mut state = EngineState::new(start);
    let mut path = Vec::new();
    let mut trace = Vec::new();

    let stop_reason = loop {
        let node = state.current.clone();
        let kind = registry
            .kind(&node)
            .ok_or_else(|| NodeError::Unregistered(node.to_string()))?;
        path.push(node.clone());

        let request = nodes::render_prompt(registry, &node, input, &state.pool, config.k, params)?;
        let mut attempts = 0;
        let outcome = loop {
            let reply = backend.complete(&request).map_err(|source| EngineError::Backend {
                source,
                partial: Box::new(PartialRun {
                    path: path.clone(),
                    trace: trace.clone(),
                }),
            })?;
            let parsed = nodes::parse_reply(&reply.content, &node, input.candidates, registry);
            if parsed.is_ok() || attempts >= config.unparseable_retries {
                break parsed;
            }
            attempts += 1;
            log::debug!("unparseable reply at {node}; asking again ({attempts})");
        };

        let popped = (kind == NodeKind::Backward && state.pool.len() >= 2)
            .then(|| state.pool.last().map(|s| s.node.clone()))
            .flatten();
        trace.push(TraceStep::from_outcome(&node, &outcome, popped));
        state = apply_outcome(state, kind, &outcome);

        if state.fail_safe {
            break StopReason::FailSafe;
        }
        if state.current.is_stop() {
            break StopReason::StopNode;
        }
        if state.nc >= config.max_count {
            break StopReason::McReached;
        }
        if state.total_visits >= hard_cap {
            break StopReason::HardCap;
        }
    };

    let last = state
        .pool
        .last()
        .expect("first visit is an aspect node and Backward never empties the pool");
    let k = config.k.min(input.candidates.len());
    Ok(RerankOutput {
        final_ranking: last.ranking.top(k),
        path,
        trace,
        stop_reason,
        pool: state.pool,
    })
}
