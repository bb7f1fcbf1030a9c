//! Node registry of the reranking graph.
//!
//! Every registered node except `Stop` can be reached from every other node.
//! Aspect nodes (Accuracy, Diversity, Fairness and any user-registered ones)
//! render a prompt, get a reply and contribute a ranking; `Backward` discards
//! the latest ranking; `Stop` ends the run and never calls the model.

mod reply;
mod template;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::HistoryPool;
use crate::llm::{ChatMessage, ChatRequest, GenerationParams};
use crate::prompt_format;
use crate::types::RerankInput;

pub use reply::{parse_reply, repair_ranking, NodeOutcome, ReplyError, NEXT_MARKER, RANKING_MARKER};
pub use template::{novelty_example, PromptTemplate, DEFAULT_PREAMBLE, PLACEHOLDERS, PREAMBLE_SEPARATOR};

pub const ACCURACY: &str = "Accuracy";
pub const DIVERSITY: &str = "Diversity";
pub const FAIRNESS: &str = "Fairness";
pub const BACKWARD: &str = "Backward";
pub const STOP: &str = "Stop";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NodeError {
    #[error("invalid node name {0:?}: use letters, digits, '_' or '-'")]
    InvalidName(String),
    #[error("node {0} is already registered")]
    DuplicateName(String),
    #[error("node name {0} is reserved")]
    ReservedName(String),
    #[error("node {0} is not registered")]
    Unregistered(String),
    #[error("node {0} has no prompt template (Stop never calls the model)")]
    NoTemplate(String),
    #[error("template for {node}: {reason}")]
    Template { node: String, reason: String },
    #[error("reading template directory {path}: {reason}")]
    TemplateDir { path: String, reason: String },
}

/// Canonical node name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self, NodeError> {
        let name = name.into();
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(NodeError::InvalidName(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn accuracy() -> Self {
        Self(ACCURACY.into())
    }

    pub fn stop() -> Self {
        Self(STOP.into())
    }

    pub fn backward() -> Self {
        Self(BACKWARD.into())
    }

    pub fn is_stop(&self) -> bool {
        self.0 == STOP
    }

    /// First character of the name, as used in path signatures ("A-D-F").
    pub fn initial(&self) -> char {
        self.0.chars().next().unwrap_or('?').to_ascii_uppercase()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for NodeId {
    type Error = NodeError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Aspect,
    Backward,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKind,
    pub template: Option<PromptTemplate>,
}

/// Ordered set of nodes. Immutable once a run starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRegistry {
    nodes: Vec<NodeSpec>,
}

impl Default for NodeRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl NodeRegistry {
    /// Accuracy, Diversity, Fairness, Backward and Stop with the shipped templates.
    pub fn standard() -> Self {
        let builtin = |name: &str, kind| {
            let id = NodeId(name.to_string());
            NodeSpec {
                template: template::builtin(name).map(|text| PromptTemplate::parse(id.clone(), text)),
                id,
                kind,
            }
        };
        Self {
            nodes: vec![
                builtin(ACCURACY, NodeKind::Aspect),
                builtin(DIVERSITY, NodeKind::Aspect),
                builtin(FAIRNESS, NodeKind::Aspect),
                builtin(BACKWARD, NodeKind::Backward),
                builtin(STOP, NodeKind::Stop),
            ],
        }
    }

    /// Keeps only the named nodes; Accuracy and Stop are always kept.
    pub fn restricted_to<S: AsRef<str>>(&self, names: &[S]) -> Result<Self, NodeError> {
        let mut keep = vec![ACCURACY.to_string(), STOP.to_string()];
        for name in names {
            let id = self
                .resolve(name.as_ref())
                .ok_or_else(|| NodeError::Unregistered(name.as_ref().to_string()))?;
            keep.push(id.0.clone());
        }
        Ok(Self {
            nodes: self
                .nodes
                .iter()
                .filter(|n| keep.contains(&n.id.0))
                .cloned()
                .collect(),
        })
    }

    /// Case-insensitive lookup returning the canonical id.
    pub fn resolve(&self, name: &str) -> Option<&NodeId> {
        self.nodes
            .iter()
            .find(|n| n.id.0.eq_ignore_ascii_case(name))
            .map(|n| &n.id)
    }

    pub fn spec(&self, id: &NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn kind(&self, id: &NodeId) -> Option<NodeKind> {
        self.spec(id).map(|n| n.kind)
    }

    pub fn ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().map(|n| &n.id)
    }

    pub fn aspect_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Aspect)
            .map(|n| &n.id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.spec(id).is_some()
    }

    /// The `{registered_nodes}` expansion.
    pub fn registered_names(&self) -> String {
        self.nodes
            .iter()
            .map(|n| n.id.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Adds a new aspect node, reachable from every node from now on.
    pub fn register_node(&mut self, name: &str, template: PromptTemplate) -> Result<NodeId, NodeError> {
        let id = NodeId::new(name)?;
        if id.0.eq_ignore_ascii_case(STOP) {
            return Err(NodeError::ReservedName(id.0));
        }
        if self.resolve(name).is_some() {
            return Err(NodeError::DuplicateName(id.0));
        }
        let template = PromptTemplate { node: id.clone(), ..template };
        template.validate(true)?;
        // Stop stays last so listings read naturally.
        let at = self.nodes.len().saturating_sub(1);
        self.nodes.insert(
            at,
            NodeSpec {
                id: id.clone(),
                kind: NodeKind::Aspect,
                template: Some(template),
            },
        );
        Ok(id)
    }

    /// Replaces the template of an existing node.
    pub fn set_template(&mut self, name: &str, template: PromptTemplate) -> Result<(), NodeError> {
        let spec = self
            .nodes
            .iter_mut()
            .find(|n| n.id.0.eq_ignore_ascii_case(name))
            .ok_or_else(|| NodeError::Unregistered(name.to_string()))?;
        if spec.kind == NodeKind::Stop {
            return Err(NodeError::NoTemplate(spec.id.0.clone()));
        }
        let template = PromptTemplate {
            node: spec.id.clone(),
            ..template
        };
        template.validate(spec.kind == NodeKind::Aspect)?;
        spec.template = Some(template);
        Ok(())
    }

    /// Loads `<Node>.txt` files: known nodes get their template replaced,
    /// unknown names are registered as new aspect nodes. Files are processed
    /// in name order.
    pub fn load_template_dir(&mut self, dir: &Path) -> Result<Vec<NodeId>, NodeError> {
        let dir_err = |reason: String| NodeError::TemplateDir {
            path: dir.display().to_string(),
            reason,
        };
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| dir_err(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let mut added = Vec::new();
        for path in files {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| dir_err(format!("bad file name {}", path.display())))?
                .to_string();
            let text = std::fs::read_to_string(&path).map_err(|e| dir_err(e.to_string()))?;
            let template = PromptTemplate::parse(NodeId::new(name.as_str())?, &text);
            if self.resolve(&name).is_some() {
                self.set_template(&name, template)?;
            } else {
                added.push(self.register_node(&name, template)?);
            }
        }
        Ok(added)
    }
}

/// Renders the prompt for `node`. The reply-format instruction is appended
/// here rather than in templates, so custom templates cannot break parsing.
pub fn render_prompt(
    registry: &NodeRegistry,
    node: &NodeId,
    input: &RerankInput<'_>,
    pool: &HistoryPool,
    k: usize,
    params: &GenerationParams,
) -> Result<ChatRequest, NodeError> {
    let spec = registry
        .spec(node)
        .ok_or_else(|| NodeError::Unregistered(node.to_string()))?;
    let template = spec
        .template
        .as_ref()
        .ok_or_else(|| NodeError::NoTemplate(node.to_string()))?;

    let registered = registry.registered_names();
    let mut values = HashMap::new();
    values.insert("user_features", prompt_format::user_block(&input.user.features));
    values.insert(
        "candidates",
        prompt_format::candidate_block(input.candidates.items(), input.catalog),
    );
    values.insert("goal", prompt_format::goal_text(input.goal.as_str()).to_string());
    values.insert(
        "history",
        prompt_format::history_block(pool.steps().iter().map(|s| (s.node.as_str(), &s.ranking))),
    );
    values.insert("k", k.to_string());
    values.insert("registered_nodes", registered.clone());

    let mut body = template.fill(&values);
    body.push_str("\n\n");
    body.push_str(&reply_instruction(spec.kind, &registered));

    let mut messages = Vec::with_capacity(2);
    if !template.system_preamble.trim().is_empty() {
        messages.push(ChatMessage::system(template.system_preamble.clone()));
    }
    messages.push(ChatMessage::user(body));
    Ok(ChatRequest::new(params, messages))
}

fn reply_instruction(kind: NodeKind, registered: &str) -> String {
    match kind {
        NodeKind::Backward => format!(
            "Answer with exactly one line:\n{NEXT_MARKER} <one of: {registered}>"
        ),
        _ => format!(
            "Answer with exactly two lines:\n{NEXT_MARKER} <one of: {registered}>\n\
             {RANKING_MARKER} <every candidate id, best first, separated by commas>"
        ),
    }
}
