use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{NodeError, NodeId};

pub const PLACEHOLDERS: [&str; 6] = [
    "user_features",
    "candidates",
    "goal",
    "history",
    "k",
    "registered_nodes",
];

/// Separates the system preamble from the body in a template file.
pub const PREAMBLE_SEPARATOR: &str = "---";

pub const DEFAULT_PREAMBLE: &str = "You are the reranking assistant of a recommender system. \
You reorder a user's candidate items and decide which reranking step to take next.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub node: NodeId,
    pub system_preamble: String,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(node: NodeId, system_preamble: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            node,
            system_preamble: system_preamble.into(),
            body: body.into(),
        }
    }

    /// Parses the template file format: an optional preamble, a line holding
    /// only `---`, then the body. Without a separator the whole text is the
    /// body and the default preamble applies.
    pub fn parse(node: NodeId, text: &str) -> Self {
        let mut preamble = Vec::new();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            if line.trim() == PREAMBLE_SEPARATOR {
                let body = lines.collect::<Vec<_>>().join("\n");
                return Self::new(node, preamble.join("\n").trim(), body.trim());
            }
            preamble.push(line);
        }
        Self::new(node, DEFAULT_PREAMBLE, text.trim())
    }

    fn count(&self, name: &str) -> usize {
        self.body.matches(&format!("{{{name}}}")).count()
    }

    pub fn validate(&self, aspect: bool) -> Result<(), NodeError> {
        for name in PLACEHOLDERS {
            if self.count(name) > 1 {
                return Err(NodeError::Template {
                    node: self.node.to_string(),
                    reason: format!("placeholder {{{name}}} used more than once"),
                });
            }
        }
        if aspect {
            for required in ["candidates", "registered_nodes"] {
                if self.count(required) == 0 {
                    return Err(NodeError::Template {
                        node: self.node.to_string(),
                        reason: format!("aspect templates must reference {{{required}}}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Substitutes known placeholders in one pass; expansions are never
    /// rescanned, so braces inside item titles survive untouched.
    pub fn fill(&self, values: &HashMap<&str, String>) -> String {
        let body = &self.body;
        let mut out = String::with_capacity(body.len() + 256);
        let mut rest = body.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) if values.contains_key(&after[..close]) => {
                    out.push_str(&values[&after[..close]]);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        collapse_blank_lines(&out)
    }
}

fn collapse_blank_lines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blanks = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            blanks += 1;
            if blanks > 1 {
                continue;
            }
        } else {
            blanks = 0;
        }
        out.push_str(line);
        out.push('\n');
    }
    out.trim_end().to_string()
}

pub(super) fn builtin(name: &str) -> Option<&'static str> {
    Some(match name {
        "Accuracy" => include_str!("../../templates/Accuracy.txt"),
        "Diversity" => include_str!("../../templates/Diversity.txt"),
        "Fairness" => include_str!("../../templates/Fairness.txt"),
        "Backward" => include_str!("../../templates/Backward.txt"),
        _ => return None,
    })
}

/// The shipped example template for a user-registered novelty node.
pub fn novelty_example() -> PromptTemplate {
    PromptTemplate::parse(
        NodeId::new("Novelty").expect("valid name"),
        include_str!("../../templates/extensions/Novelty.txt"),
    )
}
