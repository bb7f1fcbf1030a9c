use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use aspect_rerank::engine::TraceRecord;
use aspect_rerank::metrics::MetricReport;
use aspect_rerank::types::{Goal, UserId};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::paths::{read_trace, PathStats};
use crate::pipeline::{build_reranker, evaluate, run_user, EvalOutcome, Workspace};
use crate::report::{self, PATHS_JSON, PATHS_TXT, TRACE};

/// Reranks one user; prints the path, stop reason and final ids, and
/// appends the trace record to `trace.ndjson`.
pub fn cmd_rerank(config: &RunConfig, user: &str) -> Result<String, CliError> {
    config.validate()?;
    let ws = Workspace::prepare(config)?;
    let user_id = UserId::new(user).map_err(|_| CliError::Data(format!("unknown user {user:?}")))?;
    if !ws.split.test.contains_key(&user_id) {
        return Err(CliError::Data(format!("unknown user {user_id}")));
    }
    let reranker = build_reranker(config, &ws)?;
    let goal = Goal::new(config.goal.clone());
    let result = run_user(&ws, reranker.as_ref(), &goal, &user_id, config.graph.n)?;
    let mut out = format!("user: {user_id}\n");
    if let Some(run) = &result.run {
        out.push_str(&format!("path: {}\nstop: {}\n", run.path_signature(), run.stop_reason));
        let dir = config.out_dir();
        std::fs::create_dir_all(&dir)?;
        let mut file = OpenOptions::new().create(true).append(true).open(dir.join(TRACE))?;
        writeln!(file, "{}", TraceRecord::new(&user_id, &goal, run).to_line())?;
    }
    out.push_str(&format!("final: {}\n", result.ranking.joined()));
    Ok(out)
}

/// Corpus evaluation at the configured N; writes the report files.
pub fn cmd_eval(config: &RunConfig) -> Result<EvalOutcome, CliError> {
    config.validate()?;
    let ws = Workspace::prepare(config)?;
    let outcome = evaluate(config, &ws, config.graph.n)?;
    report::write_eval(&config.out_dir(), &outcome, &Goal::new(config.goal.clone()))?;
    Ok(outcome)
}

/// Path statistics from a trace file, or from a fresh engine evaluation
/// when none is given.
pub fn cmd_paths(config: &RunConfig, trace: Option<&Path>) -> Result<PathStats, CliError> {
    let records = match trace {
        Some(path) => read_trace(path)?,
        None => {
            let mut live = config.clone();
            live.reranker = "engine".into();
            cmd_eval(&live)?;
            read_trace(&live.out_dir().join(TRACE))?
        }
    };
    let order: Vec<String> = config
        .graph
        .registry(&config.base_dir)?
        .aspect_ids()
        .map(|n| n.to_string())
        .collect();
    let stats = PathStats::from_records(&records, &order)?;
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(PATHS_TXT), stats.to_table())?;
    std::fs::write(
        dir.join(PATHS_JSON),
        serde_json::to_string_pretty(&stats.to_json()).expect("json serializes") + "\n",
    )?;
    Ok(stats)
}

/// One evaluation per candidate count. Rows finished before a failure are
/// still written.
pub fn cmd_sweep(config: &RunConfig, ns: &[usize]) -> Result<Vec<(usize, MetricReport)>, CliError> {
    if ns.is_empty() {
        return Err(CliError::Config("sweep needs at least one N".into()));
    }
    let mut base = config.clone();
    base.graph.n = base.graph.n.max(base.graph.k);
    base.validate()?;
    let ws = Workspace::prepare(config)?;
    let dir = config.out_dir();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        match evaluate(config, &ws, n) {
            Ok(outcome) => {
                rows.push((n, outcome.report));
                report::write_sweep(&dir, &rows)?;
            }
            Err(e) => {
                report::write_sweep(&dir, &rows)?;
                return Err(e);
            }
        }
    }
    Ok(rows)
}
