use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::marker::extract_marker;
use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::prompt_format;

/// How the rule-based mock orders the candidates listed in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingRule {
    Identity,
    Reverse,
    /// Descending by embedded relevance marker; unmarked items go last.
    SortByMarker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextRule {
    pub keyword: String,
    pub node: String,
}

fn default_fallback() -> String {
    "Stop".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MockBehavior {
    /// Replies are returned in order, one per call.
    Scripted { replies: Vec<String> },
    /// Replies are computed from the prompt.
    ///
    /// The goal line is matched (case-insensitively) against every rule
    /// keyword; with `h` history entries in the prompt, the `h`-th matching
    /// rule names the next node, and `fallback` once they run out. A goal
    /// mentioning diversity then fairness therefore walks A-D-F-Stop.
    RuleBased {
        ranking_rule: RankingRule,
        next_rules: Vec<NextRule>,
        #[serde(default = "default_fallback")]
        fallback: String,
    },
}

impl MockBehavior {
    pub fn validate(&self) -> Result<(), BackendError> {
        match self {
            MockBehavior::Scripted { replies } if replies.is_empty() => Err(
                BackendError::InvalidBehavior("scripted mode needs at least one reply".into()),
            ),
            MockBehavior::RuleBased {
                next_rules,
                fallback,
                ..
            } => {
                if fallback.trim().is_empty() {
                    return Err(BackendError::InvalidBehavior("empty fallback node".into()));
                }
                if next_rules
                    .iter()
                    .any(|r| r.keyword.trim().is_empty() || r.node.trim().is_empty())
                {
                    return Err(BackendError::InvalidBehavior(
                        "next rules need a keyword and a node".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Deterministic offline backend.
#[derive(Debug)]
pub struct MockBackend {
    behavior: MockBehavior,
    cursor: Mutex<usize>,
}

impl MockBackend {
    pub fn new(behavior: MockBehavior) -> Result<Self, BackendError> {
        behavior.validate()?;
        Ok(Self {
            behavior,
            cursor: Mutex::new(0),
        })
    }

    pub fn scripted<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Result<Self, BackendError> {
        Self::new(MockBehavior::Scripted {
            replies: replies.into_iter().map(Into::into).collect(),
        })
    }

    pub fn rule_based(ranking_rule: RankingRule, next_rules: &[(&str, &str)]) -> Result<Self, BackendError> {
        Self::new(MockBehavior::RuleBased {
            ranking_rule,
            next_rules: next_rules
                .iter()
                .map(|(k, n)| NextRule {
                    keyword: k.to_string(),
                    node: n.to_string(),
                })
                .collect(),
            fallback: default_fallback(),
        })
    }

    pub fn behavior(&self) -> &MockBehavior {
        &self.behavior
    }

    /// Replies consumed so far (scripted mode).
    pub fn consumed(&self) -> usize {
        *self.cursor.lock().expect("mock cursor poisoned")
    }

    fn rule_reply(
        prompt: &str,
        ranking_rule: RankingRule,
        next_rules: &[NextRule],
        fallback: &str,
    ) -> String {
        let mut listed = prompt_format::parse_candidates(prompt);
        match ranking_rule {
            RankingRule::Identity => {}
            RankingRule::Reverse => listed.reverse(),
            RankingRule::SortByMarker => {
                // stable: equal or missing markers keep listing order
                listed.sort_by(|a, b| {
                    let ma = extract_marker(&a.1).unwrap_or(f64::NEG_INFINITY);
                    let mb = extract_marker(&b.1).unwrap_or(f64::NEG_INFINITY);
                    mb.total_cmp(&ma)
                });
            }
        }
        let goal = prompt_format::parse_goal(prompt)
            .unwrap_or_default()
            .to_lowercase();
        let depth = prompt_format::parse_history_nodes(prompt).len();
        let next = next_rules
            .iter()
            .filter(|r| goal.contains(&r.keyword.to_lowercase()))
            .nth(depth)
            .map_or(fallback, |r| r.node.as_str());
        let ranking = listed
            .iter()
            .map(|(id, _)| id.as_str())
            .collect::<Vec<_>>()
            .join(",");
        format!("NEXT: {next}\nRANKING: {ranking}")
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        match &self.behavior {
            MockBehavior::Scripted { replies } => {
                let mut cursor = self.cursor.lock().expect("mock cursor poisoned");
                let reply = replies
                    .get(*cursor)
                    .ok_or(BackendError::ScriptExhausted(replies.len()))?;
                *cursor += 1;
                Ok(ChatResponse::text(reply.clone()))
            }
            MockBehavior::RuleBased {
                ranking_rule,
                next_rules,
                fallback,
            } => Ok(ChatResponse::text(Self::rule_reply(
                &request.user_text(),
                *ranking_rule,
                next_rules,
                fallback,
            ))),
        }
    }

    fn name(&self) -> &str {
        match self.behavior {
            MockBehavior::Scripted { .. } => "mock-scripted",
            MockBehavior::RuleBased { .. } => "mock-rules",
        }
    }

    fn order_sensitive(&self) -> bool {
        matches!(self.behavior, MockBehavior::Scripted { .. })
    }
}
