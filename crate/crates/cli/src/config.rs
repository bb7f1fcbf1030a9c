use std::path::{Path, PathBuf};
use std::sync::Arc;

use aspect_rerank::data::{CandidateProvider, DatasetConfig, SyntheticSpec};
use aspect_rerank::engine::GraphConfig;
use aspect_rerank::llm::{ChatBackend, GenerationParams, HttpBackend, HttpConfig, MockBackend, MockBehavior};
use aspect_rerank::metrics::AttributeExtractor;
use aspect_rerank::nodes::NodeRegistry;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where users, items and interactions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Generated in memory; items carry relevance markers.
    Synthetic(SyntheticSpec),
    /// `ml-1m`, `kuairand` or `douban` file layout under `root`.
    Preset {
        name: String,
        root: PathBuf,
        #[serde(default)]
        min_interactions: Option<usize>,
    },
    /// Fully spelled-out file and column mapping.
    Files(DatasetConfig),
}

impl Default for DatasetSource {
    fn default() -> Self {
        Self::Synthetic(SyntheticSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphSection {
    pub k: usize,
    /// Candidates per user (N).
    pub n: usize,
    pub max_count: usize,
    pub hard_cap: Option<usize>,
    pub unparseable_retries: u32,
    /// Aspect nodes besides Accuracy to enable; all registered when unset.
    pub nodes: Option<Vec<String>>,
    /// `<Node>.txt` templates overriding or extending the built-in set.
    pub template_dir: Option<PathBuf>,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            k: 10,
            n: 20,
            max_count: 5,
            hard_cap: None,
            unparseable_retries: 0,
            nodes: None,
            template_dir: None,
        }
    }
}

impl GraphSection {
    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            k: self.k,
            max_count: self.max_count,
            hard_cap: self.hard_cap,
            unparseable_retries: self.unparseable_retries,
        }
    }

    pub fn registry(&self, base: &Path) -> Result<NodeRegistry, CliError> {
        let mut registry = NodeRegistry::standard();
        if let Some(dir) = &self.template_dir {
            registry
                .load_template_dir(&base.join(dir))
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(nodes) = &self.nodes {
            let mut keep = nodes.clone();
            keep.push("Backward".into());
            registry = registry.restricted_to(&keep).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(registry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(Self::Mock),
            "http" => Ok(Self::Http),
            other => Err(format!("unknown backend {other:?}, expected http or mock")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Inline mock behavior.
    pub mock: Option<MockBehavior>,
    /// Mock behavior as a JSON or TOML file.
    pub mock_file: Option<PathBuf>,
    pub http: HttpConfig,
    pub generation: GenerationParams,
}

impl BackendSection {
    pub fn build(&self, base: &Path) -> Result<Arc<dyn ChatBackend>, CliError> {
        match self.kind {
            BackendKind::Http => Ok(Arc::new(HttpBackend::new(self.http.clone().with_env()))),
            BackendKind::Mock => {
                let behavior = match (&self.mock, &self.mock_file) {
                    (Some(b), None) => b.clone(),
                    (None, Some(path)) => read_behavior(&base.join(path))?,
                    (None, None) => {
                        return Err(CliError::Config(
                            "mock backend needs [backend.mock] or backend.mock_file".into(),
                        ))
                    }
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config("set only one of [backend.mock] and backend.mock_file".into()))
                    }
                };
                Ok(Arc::new(MockBackend::new(behavior).map_err(|e| CliError::Config(e.to_string()))?))
            }
        }
    }
}

fn read_behavior(path: &Path) -> Result<MockBehavior, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|x| x == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsSection {
    pub alpha: f64,
    /// Cutoff; the graph's K when unset.
    pub k: Option<usize>,
    /// Overrides the dataset's diversity and fairness attributes.
    pub attributes: Option<AttributeExtractor>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            k: None,
            attributes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSection {
    pub mmr_lambda: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { mmr_lambda: 0.5 }
    }
}

/// The whole run, one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub goal: String,
    /// Strategy name: `engine` or a baseline.
    pub reranker: String,
    pub out: PathBuf,
    /// Worker threads for per-user runs; 0 picks the CPU count.
    pub parallelism: usize,
    pub dataset: DatasetSource,
    pub provider: CandidateProvider,
    pub graph: GraphSection,
    pub backend: BackendSection,
    pub metrics: MetricsSection,
    pub baseline: BaselineSection,
    /// Directory relative paths resolve against; the config file's.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            goal: String::new(),
            reranker: "engine".into(),
            out: "out".into(),
            parallelism: 0,
            dataset: DatasetSource::default(),
            provider: CandidateProvider::MarkerSynthetic,
            graph: GraphSection::default(),
            backend: BackendSection::default(),
            metrics: MetricsSection::default(),
            baseline: BaselineSection::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn metric_k(&self) -> usize {
        self.metrics.k.unwrap_or(self.graph.k)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.graph.graph_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.graph.n < self.graph.k {
            return Err(CliError::Config(format!("n = {} must be at least k = {}", self.graph.n, self.graph.k)));
        }
        if !(0.0..=1.0).contains(&self.metrics.alpha) {
            return Err(CliError::Config(format!("metrics.alpha {} outside [0, 1]", self.metrics.alpha)));
        }
        if !(0.0..=1.0).contains(&self.baseline.mmr_lambda) {
            return Err(CliError::Config(format!("baseline.mmr_lambda {} outside [0, 1]", self.baseline.mmr_lambda)));
        }
        Ok(())
    }
}
