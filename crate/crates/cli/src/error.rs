use std::process::ExitCode;

use aspect_rerank::data::DataError;
use aspect_rerank::engine::EngineError;
use aspect_rerank::metrics::MetricError;
use aspect_rerank::strategy::RerankError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 0 success, 2 config, 3 data, 4 backend; other failures 1.
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Backend(_) => 4,
            Self::Io(_) => 1,
        })
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(m) => Self::Config(m),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::InvalidParam(m) => Self::Config(m),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Backend { .. } => Self::Backend(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<RerankError> for CliError {
    fn from(e: RerankError) -> Self {
        match e {
            RerankError::Engine(e) => e.into(),
            RerankError::Unknown { .. } | RerankError::NoBackend(_) => Self::Config(e.to_string()),
            RerankError::Baseline(_) | RerankError::UnknownItem(_) => Self::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
