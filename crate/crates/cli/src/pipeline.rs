use std::collections::BTreeMap;

use aspect_rerank::data::{leave_one_out, load_dataset, synthetic_dataset, Dataset, DatasetConfig, Provider, Split};
use aspect_rerank::engine::{RerankOutput, StopReason};
use aspect_rerank::metrics::{AttributeExtractor, GroundTruth, MetricReport};
use aspect_rerank::strategy::{Reranker, RerankerRegistry, SimilarityAttr, StrategyContext};
use aspect_rerank::types::{Goal, ItemId, Ranking, RerankInput, User, UserId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSource, RunConfig};
use crate::error::CliError;

/// Loaded data, split and candidate provider shared by every command.
pub struct Workspace {
    pub dataset: Dataset,
    pub split: Split,
    pub provider: Provider,
    pub attributes: AttributeExtractor,
}

impl Workspace {
    pub fn prepare(config: &RunConfig) -> Result<Self, CliError> {
        let (dataset, attributes) = match &config.dataset {
            DatasetSource::Synthetic(spec) => (synthetic_dataset(spec)?, AttributeExtractor::movielens()),
            DatasetSource::Preset {
                name,
                root,
                min_interactions,
            } => {
                let mut ds = DatasetConfig::preset(name, config.resolve(root))
                    .ok_or_else(|| CliError::Config(format!("unknown dataset preset {name:?}")))?;
                if let Some(m) = min_interactions {
                    ds.min_interactions = *m;
                }
                (load_dataset(&ds)?, ds.attributes)
            }
            DatasetSource::Files(ds) => {
                let mut ds = ds.clone();
                ds.root = config.resolve(&ds.root);
                (load_dataset(&ds)?, ds.attributes.clone())
            }
        };
        let attributes = config.metrics.attributes.clone().unwrap_or(attributes);
        let split = leave_one_out(&dataset.log)?;
        let provider_config = match &config.provider {
            aspect_rerank::data::CandidateProvider::PrecomputedFile { path } => {
                aspect_rerank::data::CandidateProvider::PrecomputedFile {
                    path: config.resolve(path),
                }
            }
            other => other.clone(),
        };
        let provider = Provider::build(&provider_config, &dataset, &split, config.seed)?;
        Ok(Self {
            dataset,
            split,
            provider,
            attributes,
        })
    }

    pub fn test_users(&self) -> Vec<UserId> {
        self.split.users().cloned().collect()
    }

    fn user(&self, id: &UserId) -> User {
        self.dataset
            .users
            .get(id)
            .cloned()
            .unwrap_or_else(|| User::new(id.clone(), Default::default()))
    }
}

/// Instantiates the configured strategy from the name registry.
pub fn build_reranker(config: &RunConfig, ws: &Workspace) -> Result<Box<dyn Reranker>, CliError> {
    let registry = RerankerRegistry::with_builtins();
    let backend = if config.reranker == "engine" {
        Some(config.backend.build(&config.base_dir)?)
    } else {
        None
    };
    let ctx = StrategyContext {
        graph: config.graph.graph_config(),
        nodes: config.graph.registry(&config.base_dir)?,
        backend,
        params: config.backend.generation.clone(),
        mmr_lambda: config.baseline.mmr_lambda,
        similarity: SimilarityAttr {
            attr: ws.attributes.diversity_attr.clone(),
            delimiter: ws.attributes.delimiter.clone(),
        },
    };
    Ok(registry.build(&config.reranker, &ctx)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserResult {
    pub user: UserId,
    pub target: ItemId,
    pub target_in_candidates: bool,
    pub ranking: Ranking,
    pub run: Option<RerankOutput>,
}

/// One line of `per_user.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerUserRecord {
    pub user_id: UserId,
    pub target: ItemId,
    pub target_in_candidates: bool,
    pub ranking: Ranking,
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path_signature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop_reason: Option<StopReason>,
}

impl From<&UserResult> for PerUserRecord {
    fn from(r: &UserResult) -> Self {
        Self {
            user_id: r.user.clone(),
            target: r.target.clone(),
            target_in_candidates: r.target_in_candidates,
            ranking: r.ranking.clone(),
            rank: r.ranking.rank_of(&r.target),
            path_signature: r.run.as_ref().map(RerankOutput::path_signature),
            stop_reason: r.run.as_ref().map(|o| o.stop_reason),
        }
    }
}

/// Reranks one user's `n` candidates.
pub fn run_user(
    ws: &Workspace,
    reranker: &dyn Reranker,
    goal: &Goal,
    user_id: &UserId,
    n: usize,
) -> Result<UserResult, CliError> {
    let target = ws
        .split
        .test
        .get(user_id)
        .ok_or_else(|| CliError::Data(format!("unknown user {user_id}")))?
        .item
        .clone();
    let candidates = ws.provider.provide(user_id, n)?;
    let user = ws.user(user_id);
    let input = RerankInput {
        user: &user,
        candidates: &candidates,
        catalog: &ws.dataset.items,
        goal,
    };
    let result = reranker.rerank(&input)?;
    Ok(UserResult {
        user: user_id.clone(),
        target_in_candidates: candidates.contains(&target),
        target,
        ranking: result.ranking,
        run: result.run,
    })
}

/// Runs every user, in parallel unless the reranker depends on call order.
/// Results come back sorted by user id whatever the completion order.
pub fn run_users(
    config: &RunConfig,
    ws: &Workspace,
    reranker: &dyn Reranker,
    users: &[UserId],
    n: usize,
) -> Result<Vec<UserResult>, CliError> {
    let goal = Goal::new(config.goal.clone());
    let mut results = if reranker.order_sensitive() || config.parallelism == 1 {
        users
            .iter()
            .map(|u| run_user(ws, reranker, &goal, u, n))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            users
                .par_iter()
                .map(|u| run_user(ws, reranker, &goal, u, n))
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    results.sort_by(|a, b| a.user.cmp(&b.user));
    Ok(results)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub reranker: String,
    pub n: usize,
    pub report: MetricReport,
    pub missing_target: usize,
    pub users: Vec<UserResult>,
}

/// Evaluates the configured reranker over every test user with `n`
/// candidates each.
pub fn evaluate(config: &RunConfig, ws: &Workspace, n: usize) -> Result<EvalOutcome, CliError> {
    let users = ws.test_users();
    if users.is_empty() {
        return Err(CliError::Data("empty test set".into()));
    }
    let reranker = build_reranker(config, ws)?;
    let results = run_users(config, ws, reranker.as_ref(), &users, n)?;
    let missing_target = results.iter().filter(|r| !r.target_in_candidates).count();
    if missing_target > 0 {
        log::warn!("{missing_target} candidate lists lack the held-out item; HR cannot reach 1");
    }
    let lists: BTreeMap<UserId, Ranking> = results.iter().map(|r| (r.user.clone(), r.ranking.clone())).collect();
    let truth: GroundTruth = results.iter().map(|r| (r.user.clone(), r.target.clone())).collect();
    let report = MetricReport::evaluate(
        &lists,
        &truth,
        &ws.dataset.items,
        &ws.attributes,
        config.metrics.alpha,
        config.metric_k(),
    )?;
    Ok(EvalOutcome {
        reranker: reranker.name().to_string(),
        n,
        report,
        missing_target,
        users: results,
    })
}
