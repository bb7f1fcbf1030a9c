//! Rerankers behind one trait, registered by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    self, dpp_greedy_map, feature_similarity, indices_to_ranking, mmr_rerank, quality_diversity_kernel, BaselineError,
    MmrParams,
};
use crate::engine::{run_rerank, EngineError, GraphConfig, RerankOutput};
use crate::llm::{ChatBackend, GenerationParams};
use crate::nodes::NodeRegistry;
use crate::types::{linear_scores, Item, Ranking, RerankInput};

#[derive(Debug, Error)]
pub enum RerankError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("unknown reranker {name:?}; registered: {registered}")]
    Unknown { name: String, registered: String },
    #[error("reranker {0} needs an LLM backend")]
    NoBackend(String),
    #[error("candidate {0} is missing from the catalog")]
    UnknownItem(String),
}

/// A final list, plus the traversal record for graph rerankers.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankResult {
    pub ranking: Ranking,
    pub run: Option<RerankOutput>,
}

impl From<Ranking> for RerankResult {
    fn from(ranking: Ranking) -> Self {
        Self { ranking, run: None }
    }
}

pub trait Reranker: Send + Sync {
    fn name(&self) -> &str;
    fn rerank(&self, input: &RerankInput<'_>) -> Result<RerankResult, RerankError>;
    /// True when results depend on the order in which users are processed.
    fn order_sensitive(&self) -> bool {
        false
    }
}

/// The LLM node-graph traversal.
pub struct LlmGraphReranker {
    pub registry: NodeRegistry,
    pub config: GraphConfig,
    pub backend: Arc<dyn ChatBackend>,
    pub params: GenerationParams,
}

impl Reranker for LlmGraphReranker {
    fn name(&self) -> &str {
        "engine"
    }

    fn rerank(&self, input: &RerankInput<'_>) -> Result<RerankResult, RerankError> {
        let out = run_rerank(input, &self.registry, &self.config, self.backend.as_ref(), &self.params)?;
        Ok(RerankResult {
            ranking: out.final_ranking.clone(),
            run: Some(out),
        })
    }

    fn order_sensitive(&self) -> bool {
        self.backend.order_sensitive()
    }
}

/// Provider order, truncated.
pub struct Upstream {
    pub k: usize,
}

impl Reranker for Upstream {
    fn name(&self) -> &str {
        "upstream"
    }

    fn rerank(&self, input: &RerankInput<'_>) -> Result<RerankResult, RerankError> {
        Ok(input.candidates.items().iter().take(self.k).cloned().collect::<Ranking>().into())
    }
}

pub struct ScoreSort {
    pub k: usize,
}

impl Reranker for ScoreSort {
    fn name(&self) -> &str {
        "score_sort"
    }

    fn rerank(&self, input: &RerankInput<'_>) -> Result<RerankResult, RerankError> {
        Ok(baselines::score_sort(input.candidates, self.k)?.into())
    }
}

/// Upstream scores, or linear position scores when the provider gave none.
fn relevance(input: &RerankInput<'_>) -> Vec<f64> {
    match input.candidates.scores() {
        Some(s) => s.to_vec(),
        None => linear_scores(input.candidates.len()).expect("candidate lists are non-empty"),
    }
}

fn candidate_items<'a>(input: &RerankInput<'a>) -> Result<Vec<&'a Item>, RerankError> {
    input
        .candidates
        .items()
        .iter()
        .map(|id| input.catalog.get(id).ok_or_else(|| RerankError::UnknownItem(id.to_string())))
        .collect()
}

/// Similarity source shared by the MMR and DPP baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityAttr {
    pub attr: String,
    pub delimiter: String,
}

pub struct Mmr {
    pub k: usize,
    pub lambda: f64,
    pub similarity: SimilarityAttr,
}

impl Reranker for Mmr {
    fn name(&self) -> &str {
        "mmr"
    }

    fn rerank(&self, input: &RerankInput<'_>) -> Result<RerankResult, RerankError> {
        let items = candidate_items(input)?;
        let sim = feature_similarity(&items, &self.similarity.attr, &self.similarity.delimiter)?;
        let picks = mmr_rerank(&relevance(input), &sim, MmrParams { lambda: self.lambda, k: self.k })?;
        Ok(indices_to_ranking(input.candidates, &picks).into())
    }
}

pub struct Dpp {
    pub k: usize,
    pub similarity: SimilarityAttr,
}

impl Reranker for Dpp {
    fn name(&self) -> &str {
        "dpp"
    }

    fn rerank(&self, input: &RerankInput<'_>) -> Result<RerankResult, RerankError> {
        let items = candidate_items(input)?;
        let sim = feature_similarity(&items, &self.similarity.attr, &self.similarity.delimiter)?;
        let kernel = quality_diversity_kernel(&relevance(input), &sim)?;
        let picks = dpp_greedy_map(&kernel, self.k.min(kernel.len()))?;
        Ok(indices_to_ranking(input.candidates, &picks).into())
    }
}

/// Everything a factory may need to build a reranker.
#[derive(Clone)]
pub struct StrategyContext {
    pub graph: GraphConfig,
    pub nodes: NodeRegistry,
    pub backend: Option<Arc<dyn ChatBackend>>,
    pub params: GenerationParams,
    pub mmr_lambda: f64,
    pub similarity: SimilarityAttr,
}

pub type Factory = Box<dyn Fn(&StrategyContext) -> Result<Box<dyn Reranker>, RerankError> + Send + Sync>;

/// Name-to-factory table of reranking strategies.
pub struct RerankerRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for RerankerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl RerankerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `engine`, `upstream`, `score_sort`, `mmr` and `dpp`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("engine", |ctx| {
            let backend = ctx.backend.clone().ok_or_else(|| RerankError::NoBackend("engine".into()))?;
            Ok(Box::new(LlmGraphReranker {
                registry: ctx.nodes.clone(),
                config: ctx.graph.clone(),
                backend,
                params: ctx.params.clone(),
            }))
        });
        r.register("upstream", |ctx| Ok(Box::new(Upstream { k: ctx.graph.k })));
        r.register("score_sort", |ctx| Ok(Box::new(ScoreSort { k: ctx.graph.k })));
        r.register("mmr", |ctx| {
            Ok(Box::new(Mmr {
                k: ctx.graph.k,
                lambda: ctx.mmr_lambda,
                similarity: ctx.similarity.clone(),
            }))
        });
        r.register("dpp", |ctx| {
            Ok(Box::new(Dpp {
                k: ctx.graph.k,
                similarity: ctx.similarity.clone(),
            }))
        });
        r
    }

    /// Adds or replaces a strategy.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StrategyContext) -> Result<Box<dyn Reranker>, RerankError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, ctx: &StrategyContext) -> Result<Box<dyn Reranker>, RerankError> {
        let factory = self.factories.get(name).ok_or_else(|| RerankError::Unknown {
            name: name.to_string(),
            registered: self.names().collect::<Vec<_>>().join(", "),
        })?;
        factory(ctx)
    }
}
