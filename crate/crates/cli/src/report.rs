use std::fs;
use std::path::Path;

use aspect_rerank::engine::TraceRecord;
use aspect_rerank::metrics::MetricReport;
use aspect_rerank::types::Goal;

use crate::error::CliError;
use crate::pipeline::{EvalOutcome, PerUserRecord};

pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const PER_USER: &str = "per_user.ndjson";
pub const TRACE: &str = "trace.ndjson";
pub const SWEEP_TSV: &str = "sweep.tsv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const PATHS_TXT: &str = "paths.txt";
pub const PATHS_JSON: &str = "paths.json";

pub fn report_text(outcome: &EvalOutcome) -> String {
    let r = &outcome.report;
    let mut out = format!(
        "# reranker: {}\n# candidates per user (N): {}\n# cutoff (K): {}\n# alpha: {}\n# users: {}\n",
        outcome.reranker, outcome.n, r.k, r.alpha, r.users
    );
    if outcome.missing_target > 0 {
        out.push_str(&format!(
            "# warning: {} candidate lists lack the held-out item\n",
            outcome.missing_target
        ));
    }
    out.push_str(&r.to_table(&outcome.reranker));
    out
}

pub fn report_json(outcome: &EvalOutcome) -> serde_json::Value {
    let mut v = outcome.report.to_json();
    let map = v.as_object_mut().expect("report json is an object");
    map.insert("reranker".into(), outcome.reranker.clone().into());
    map.insert("n".into(), outcome.n.into());
    map.insert("missing_target".into(), outcome.missing_target.into());
    v
}

fn lines<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|r| serde_json::to_string(&r).expect("records serialize") + "\n")
        .collect()
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

/// Writes report.txt, report.json, per_user.ndjson and, for graph runs,
/// trace.ndjson. Files are replaced, not appended to.
pub fn write_eval(dir: &Path, outcome: &EvalOutcome, goal: &Goal) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(REPORT_TXT), report_text(outcome))?;
    fs::write(dir.join(REPORT_JSON), pretty(&report_json(outcome)))?;
    fs::write(dir.join(PER_USER), lines(outcome.users.iter().map(PerUserRecord::from)))?;
    let traces: Vec<TraceRecord> = outcome
        .users
        .iter()
        .filter_map(|u| u.run.as_ref().map(|run| TraceRecord::new(&u.user, goal, run)))
        .collect();
    if !traces.is_empty() {
        fs::write(dir.join(TRACE), lines(&traces))?;
    }
    Ok(())
}

pub fn sweep_table(rows: &[(usize, MetricReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let mut out = format!("N\t{}\n", first.header().join("\t"));
    for (n, r) in rows {
        out.push_str(&format!("{n}\t{}\n", r.values().join("\t")));
    }
    out
}

pub fn write_sweep(dir: &Path, rows: &[(usize, MetricReport)]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SWEEP_TSV), sweep_table(rows))?;
    let json: Vec<serde_json::Value> = rows
        .iter()
        .map(|(n, r)| {
            let mut v = r.to_json();
            v.as_object_mut().expect("object").insert("n".into(), (*n).into());
            v
        })
        .collect();
    fs::write(dir.join(SWEEP_JSON), pretty(&serde_json::Value::Array(json)))?;
    Ok(())
}
