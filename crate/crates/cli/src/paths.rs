use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use aspect_rerank::engine::{StopReason, TraceRecord};
use aspect_rerank::nodes::NodeId;
use serde::Serialize;

use crate::error::CliError;

/// Aggregate traversal statistics over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStats {
    pub runs: usize,
    /// Share of aspect-node visits per node; sums to 1.
    pub node_used: Vec<(String, f64)>,
    pub fav_path: String,
    pub fav_prop: f64,
    /// Mean number of non-Backward visits per run.
    pub ave_length: f64,
    /// Share of runs ended by the MC budget.
    pub max_stop_prop: f64,
}

fn is_aspect(node: &NodeId) -> bool {
    node.as_str() != "Backward"
}

impl PathStats {
    /// `node_order` fixes the column order; nodes seen in the traces but
    /// absent from it follow in name order.
    pub fn from_records(records: &[TraceRecord], node_order: &[String]) -> Result<Self, CliError> {
        if records.is_empty() {
            return Err(CliError::Data("no trace records to aggregate".into()));
        }
        let runs = records.len() as f64;
        let mut visits: BTreeMap<&str, usize> = BTreeMap::new();
        let mut signatures: HashMap<&str, usize> = HashMap::new();
        let mut aspect_total = 0usize;
        let mut max_stops = 0usize;
        for r in records {
            for node in r.path.iter().filter(|n| is_aspect(n)) {
                *visits.entry(node.as_str()).or_default() += 1;
                aspect_total += 1;
            }
            *signatures.entry(r.path_signature.as_str()).or_default() += 1;
            if r.stop_reason == StopReason::McReached {
                max_stops += 1;
            }
        }
        let mut order: Vec<String> = node_order.iter().filter(|n| n.as_str() != "Backward" && n.as_str() != "Stop").cloned().collect();
        for name in visits.keys() {
            if !order.iter().any(|o| o == name) {
                order.push(name.to_string());
            }
        }
        let node_used = order
            .into_iter()
            .map(|name| {
                let share = visits.get(name.as_str()).copied().unwrap_or(0) as f64 / aspect_total.max(1) as f64;
                (name, share)
            })
            .collect();
        let (fav_path, fav_count) = signatures
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .expect("records are non-empty");
        Ok(Self {
            runs: records.len(),
            node_used,
            fav_path: fav_path.to_string(),
            fav_prop: fav_count as f64 / runs,
            ave_length: aspect_total as f64 / runs,
            max_stop_prop: max_stops as f64 / runs,
        })
    }

    pub fn to_table(&self) -> String {
        let names: Vec<&str> = self.node_used.iter().map(|(n, _)| n.as_str()).collect();
        let shares: Vec<String> = self.node_used.iter().map(|(_, s)| format!("{s:.4}")).collect();
        let mut out = String::new();
        out.push_str(&format!("# runs: {}\n", self.runs));
        out.push_str("# Ave Length counts non-Backward visits\n");
        out.push_str(&format!(
            "Node Used ({})\tFav Path\tFav Prop\tAve Length\tMax Stop Prop\n",
            names.join("/")
        ));
        out.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\n",
            shares.join("/"),
            self.fav_path,
            self.fav_prop,
            self.ave_length,
            self.max_stop_prop
        ));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let used: serde_json::Map<String, serde_json::Value> =
            self.node_used.iter().map(|(n, s)| (n.clone(), (*s).into())).collect();
        serde_json::json!({
            "runs": self.runs,
            "node_used": used,
            "fav_path": self.fav_path,
            "fav_prop": self.fav_prop,
            "ave_length": self.ave_length,
            "max_stop_prop": self.max_stop_prop,
        })
    }
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use aspect_rerank::types::{Goal, Ranking, UserId};

    fn record(sig_nodes: &[&str], stop: StopReason) -> TraceRecord {
        let path: Vec<NodeId> = sig_nodes.iter().map(|n| NodeId::new(*n).unwrap()).collect();
        TraceRecord {
            user_id: UserId::new("u").unwrap(),
            goal: Goal::new(""),
            path_signature: aspect_rerank::engine::path_signature(&path),
            path,
            stop_reason: stop,
            final_ranking: Ranking::default(),
            steps: vec![],
        }
    }

    #[test]
    fn ties_pick_the_lexicographically_smallest_path() {
        let records = [
            record(&["Accuracy", "Fairness"], StopReason::StopNode),
            record(&["Accuracy", "Diversity"], StopReason::StopNode),
        ];
        let s = PathStats::from_records(&records, &[]).unwrap();
        assert_eq!(s.fav_path, "A-D");
        assert_eq!(s.fav_prop, 0.5);
    }

    #[test]
    fn backward_is_excluded_from_lengths_and_usage() {
        let records = [record(&["Accuracy", "Accuracy", "Backward", "Diversity"], StopReason::McReached)];
        let s = PathStats::from_records(&records, &["Accuracy".into(), "Diversity".into(), "Fairness".into()]).unwrap();
        assert_eq!(s.ave_length, 3.0);
        assert_eq!(s.max_stop_prop, 1.0);
        assert_eq!(s.node_used[0], ("Accuracy".to_string(), 2.0 / 3.0));
        assert_eq!(s.node_used[2], ("Fairness".to_string(), 0.0));
        assert!(s.to_table().contains("A-A-B-D"));
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(PathStats::from_records(&[], &[]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shares_are_distributions(paths in proptest::collection::vec(proptest::collection::vec(0usize..4, 1..6), 1..30)) {
            let names = ["Accuracy", "Diversity", "Fairness", "Backward"];
            let records: Vec<TraceRecord> = paths
                .iter()
                .map(|p| {
                    let mut nodes = vec!["Accuracy"];
                    nodes.extend(p.iter().map(|&i| names[i]));
                    record(&nodes, StopReason::StopNode)
                })
                .collect();
            let s = PathStats::from_records(&records, &[]).unwrap();
            let total: f64 = s.node_used.iter().map(|(_, v)| v).sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-9);
            proptest::prop_assert!(s.fav_prop > 0.0 && s.fav_prop <= 1.0);
            proptest::prop_assert!(s.ave_length >= 1.0);
        }
    }
}
