//! Goal-conditioned reranking of recommender candidate lists by an LLM
//! walking a graph of aspect nodes (accuracy, diversity, fairness, ...),
//! with evaluation metrics, classical baselines and dataset tooling.

pub mod baselines;
pub mod data;
pub mod engine;
pub mod llm;
pub mod metrics;
pub mod nodes;
pub mod prompt_format;
pub mod strategy;
pub mod types;

pub use engine::{run_rerank, GraphConfig, HistoryPool, RerankOutput, StopReason, TraceRecord};
pub use llm::{ChatBackend, GenerationParams, HttpBackend, MockBackend};
pub use nodes::{NodeId, NodeRegistry};
pub use strategy::{Reranker, RerankerRegistry};
pub use types::{CandidateList, Goal, Item, ItemCatalog, ItemId, Ranking, RerankInput, User, UserId};
