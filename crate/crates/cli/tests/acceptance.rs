//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p aspect-rerank-cli --test acceptance`. Exits non-zero
//! when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use aspect_rerank::baselines::{
    dpp_greedy_map, mmr_rerank, score_sort, DppKernel, MmrParams, SimilarityMatrix, GAIN_FLOOR,
};
use aspect_rerank::engine::{run_rerank, GraphConfig, RerankOutput, StopReason, TraceRecord};
use aspect_rerank::llm::{ChatBackend, GenerationParams, HttpBackend, HttpConfig, MockBackend, MockBehavior, RankingRule, ENDPOINT_ENV};
use aspect_rerank::metrics::{
    alpha_ndcg, hit_ratio, mad, ndcg, AlphaNdcgParams, AttributeExtractor, CategoryMap,
};
use aspect_rerank::nodes::{novelty_example, NodeKind, NodeRegistry};
use aspect_rerank::types::{
    CandidateList, FeatureMap, Goal, Item, ItemCatalog, ItemId, Ranking, RerankInput, User, UserId,
};
use aspect_rerank::data::{CandidateProvider, SyntheticSpec};
use aspect_rerank_cli::config::{BackendKind, DatasetSource};
use aspect_rerank_cli::paths::PathStats;
use aspect_rerank_cli::report::{PER_USER, REPORT_JSON, REPORT_TXT, TRACE};
use aspect_rerank_cli::{cmd_eval, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= 1e-9, || format!("{what}: got {a}, expected {b}"))
}

fn within(start: Instant, budget: Duration) -> Result<String, String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:.2?}, budget {budget:?}"))?;
    Ok(format!("{took:.2?}"))
}

fn ids(raw: &[&str]) -> Vec<ItemId> {
    raw.iter().map(|s| ItemId::new(*s).unwrap()).collect()
}

fn uid(s: &str) -> UserId {
    UserId::new(s).unwrap()
}

fn fixture(n: usize) -> (User, CandidateList, ItemCatalog, Goal) {
    let user = User::new(uid("u"), FeatureMap::new());
    let items = (0..n).map(|i| ItemId::new(format!("i{i}")).unwrap()).collect();
    let cands = CandidateList::new(user.id.clone(), items, None).unwrap();
    (user, cands, ItemCatalog::new(), Goal::new("balance diversity and fairness"))
}

fn run_on(registry: &NodeRegistry, backend: &dyn ChatBackend, config: &GraphConfig, n: usize) -> Result<RerankOutput, String> {
    let (user, cands, catalog, goal) = fixture(n);
    let input = RerankInput {
        user: &user,
        candidates: &cands,
        catalog: &catalog,
        goal: &goal,
    };
    run_rerank(&input, registry, config, backend, &GenerationParams::default()).map_err(|e| e.to_string())
}

fn scripted(replies: &[&str], registry: &NodeRegistry, config: &GraphConfig, n: usize) -> Result<RerankOutput, String> {
    let mock = MockBackend::scripted(replies.iter().copied()).map_err(|e| e.to_string())?;
    run_on(registry, &mock, config, n)
}

fn live_smoke() -> Result<String, String> {
    let Ok(endpoint) = std::env::var(ENDPOINT_ENV) else {
        return Ok(format!("desk-scale suite below; live smoke skipped ({ENDPOINT_ENV} unset, non-gating)"));
    };
    let backend = HttpBackend::new(HttpConfig::default().with_env());
    // non-gating: a failed live call is reported but does not fail the line
    match run_on(&NodeRegistry::standard(), &backend, &GraphConfig::with_k(3, 3), 5) {
        Ok(out) => Ok(format!("live smoke against {endpoint}: path {} final {}", out.path_signature(), out.final_ranking.joined())),
        Err(e) => Ok(format!("live smoke against {endpoint} failed (non-gating): {e}")),
    }
}

fn metric_oracles() -> Result<String, String> {
    let start = Instant::now();
    let one = |list: &[&str]| BTreeMap::from([(uid("u"), Ranking::new(ids(list)))]);

    let truth = BTreeMap::from([(uid("u"), ItemId::new("c").unwrap())]);
    close(ndcg(&one(&["a", "b", "c", "d"]), &truth, 10).map_err(|e| e.to_string())?, 0.5, "NDCG hit at rank 3")?;

    let lists: BTreeMap<_, _> = [("u1", "x"), ("u2", "y"), ("u3", "z")]
        .iter()
        .map(|(u, first)| (uid(u), Ranking::new(ids(&[first, "w"]))))
        .collect();
    let truth: BTreeMap<_, _> = [("u1", "x"), ("u2", "q"), ("u3", "w")]
        .iter()
        .map(|(u, t)| (uid(u), ItemId::new(*t).unwrap()))
        .collect();
    close(hit_ratio(&lists, &truth, 10).map_err(|e| e.to_string())?, 2.0 / 3.0, "HR 3 users")?;

    let dated = |id: &str, year: &str| Item::new(ItemId::new(id).unwrap(), FeatureMap::from_pairs([("year", year), ("genre", "Drama")]).unwrap());
    let catalog: ItemCatalog = [dated("a", "1990"), dated("b", "2000"), dated("c", "1980"), dated("d", "1999")].into_iter().collect();
    let v = mad(&one(&["a", "b", "c", "d"]), &AttributeExtractor::movielens(), &catalog, 4).map_err(|e| e.to_string())?;
    close(v, 1.0 / 3.0, "MAD 4-item")?;

    let cat = |c: &str| BTreeSet::from([c.to_string()]);
    let sets = [cat("a"), cat("a"), cat("b")];
    let categories: CategoryMap = ids(&["x", "y", "z"]).into_iter().zip(sets.iter().cloned()).collect();
    let got = alpha_ndcg(&Ranking::new(ids(&["x", "y", "z"])), &categories, AlphaNdcgParams::new(0.5, 3)).map_err(|e| e.to_string())?;
    let refs: Vec<&BTreeSet<String>> = sets.iter().collect();
    let oracle = common::alpha_dcg(&refs, 0.5) / common::exhaustive_alpha_ideal(&refs, 0.5);
    close(got, oracle, "alpha-NDCG vs exhaustive ideal")?;
    ensure((got - 0.9652).abs() < 5e-5, || format!("alpha-NDCG {got} is not ~0.9652"))?;

    let t = within(start, Duration::from_secs(5))?;
    Ok(format!("NDCG 0.5, HR 2/3, MAD 1/3, alpha-NDCG {got:.10} in {t}"))
}

fn baseline_oracles() -> Result<String, String> {
    let start = Instant::now();
    let sim = SimilarityMatrix::new(vec![vec![1.0, 0.9, 0.1], vec![0.9, 1.0, 0.1], vec![0.1, 0.1, 1.0]]).map_err(|e| e.to_string())?;
    let picks = mmr_rerank(&[0.9, 0.8, 0.7], &sim, MmrParams { lambda: 0.5, k: 3 }).map_err(|e| e.to_string())?;
    ensure(picks == [0, 2, 1], || format!("MMR hand example gave {picks:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let n = rng.random_range(1..=20);
        let k = rng.random_range(1..=n);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u8)) / 5.0).collect();
        let sim = SimilarityMatrix::from_fn(n, |_, _| rng.random_range(0.0..=1.0)).map_err(|e| e.to_string())?;
        let items: Vec<ItemId> = (0..n).map(|i| ItemId::new(format!("i{i}")).unwrap()).collect();
        let cands = CandidateList::new(uid("u"), items.clone(), Some(scores.clone())).map_err(|e| e.to_string())?;
        let mmr: Vec<ItemId> = mmr_rerank(&scores, &sim, MmrParams { lambda: 1.0, k })
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|i| items[i].clone())
            .collect();
        let sorted = score_sort(&cands, k).map_err(|e| e.to_string())?.items;
        ensure(mmr == sorted, || format!("MMR lambda=1 case {case}: {mmr:?} vs {sorted:?}"))?;
    }

    let diag = DppKernel::new(vec![vec![4.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 9.0]]).map_err(|e| e.to_string())?;
    let picks = dpp_greedy_map(&diag, 2).map_err(|e| e.to_string())?;
    ensure(picks == [2, 0], || format!("DPP diagonal example gave {picks:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4096);
    for case in 0..500 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=n);
        let l = common::random_psd(&mut rng, n);
        let fast = dpp_greedy_map(&DppKernel::new(l.clone()).map_err(|e| e.to_string())?, k).map_err(|e| e.to_string())?;
        let naive = common::naive_dpp_greedy(&l, k, GAIN_FLOOR);
        ensure(fast == naive, || format!("DPP case {case}: {fast:?} vs naive {naive:?}"))?;
        close(common::log_det(&l, &fast), common::log_det(&l, &naive), "DPP log-det")?;
    }
    let t = within(start, Duration::from_secs(30))?;
    Ok(format!("MMR [1,3,2], 200 MMR/score_sort, 500 DPP kernels in {t}"))
}

fn termination() -> Result<String, String> {
    let start = Instant::now();
    let registry = NodeRegistry::standard();
    let failures: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=25);
            let config = GraphConfig::with_k(rng.random_range(1..=12), rng.random_range(1..=6));
            let out = match run_on(&registry, &common::AdversarialBackend::new(seed), &config, n) {
                Ok(out) => out,
                Err(e) => return Some(format!("seed {seed}: {e}")),
            };
            let Some(last) = out.pool.last() else {
                return Some(format!("seed {seed}: empty pool at Stop"));
            };
            let mut perm: Vec<&str> = last.ranking.items.iter().map(ItemId::as_str).collect();
            perm.sort_unstable();
            let mut expected: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
            expected.sort_unstable();
            if out.trace.len() > config.hard_cap() {
                Some(format!("seed {seed}: {} visits over cap {}", out.trace.len(), config.hard_cap()))
            } else if perm != expected.iter().map(String::as_str).collect::<Vec<_>>() {
                Some(format!("seed {seed}: last ranking is not a candidate permutation"))
            } else if out.final_ranking != last.ranking.top(config.k.min(n)) {
                Some(format!("seed {seed}: final list is not the K-prefix"))
            } else {
                None
            }
        })
        .collect();
    ensure(failures.is_empty(), || format!("{} failures, first: {}", failures.len(), failures[0]))?;
    let t = within(start, Duration::from_secs(60))?;
    Ok(format!("10000 adversarial runs in {t}"))
}

fn small_config(out: &Path, behavior: MockBehavior, users: usize) -> RunConfig {
    let mut config = RunConfig {
        seed: 3,
        goal: "Improve diversity, then fairness.".into(),
        out: out.to_path_buf(),
        dataset: DatasetSource::Synthetic(SyntheticSpec {
            users,
            shared_items: 60,
            interactions_per_user: 6,
            seed: 3,
        }),
        provider: CandidateProvider::MarkerSynthetic,
        ..RunConfig::default()
    };
    config.backend.kind = BackendKind::Mock;
    config.backend.mock = Some(behavior);
    config
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let users = 6;
    let mut replies = Vec::new();
    for _ in 0..users {
        replies.extend(["NEXT: Diversity", "NEXT: Backward", "NEXT: Fairness", "NEXT: Stop"].map(String::from));
    }
    let files = [TRACE, REPORT_TXT, REPORT_JSON, PER_USER];
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let config = small_config(&out, MockBehavior::Scripted { replies: replies.clone() }, users);
        cmd_eval(&config).map_err(|e| e.to_string())?;
        let bytes: Vec<Vec<u8>> = files
            .iter()
            .map(|f| std::fs::read(out.join(f)).map_err(|e| format!("{f}: {e}")))
            .collect::<Result<_, _>>()?;
        outputs.push(bytes);
    }
    for (i, f) in files.iter().enumerate() {
        ensure(outputs[0][i] == outputs[1][i], || format!("{f} differs between runs"))?;
    }
    let traces = String::from_utf8_lossy(&outputs[0][0]).lines().count();
    ensure(traces == users, || format!("{traces} trace lines for {users} users"))?;
    Ok(format!("{} files byte-identical over 2 runs", files.len()))
}

fn end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rule = |r: RankingRule| MockBehavior::RuleBased {
        ranking_rule: r,
        next_rules: vec![],
        fallback: "Stop".into(),
    };
    let mut oracle = small_config(&dir.path().join("oracle"), rule(RankingRule::SortByMarker), 40);
    oracle.parallelism = 4;
    let hr = cmd_eval(&oracle).map_err(|e| e.to_string())?.report.hr;
    ensure(hr == 1.0, || format!("oracle HR@10 {hr}"))?;

    let identity = small_config(&dir.path().join("identity"), rule(RankingRule::Identity), 40);
    let engine = cmd_eval(&identity).map_err(|e| e.to_string())?.report;
    let mut upstream = identity.clone();
    upstream.reranker = "upstream".into();
    upstream.out = dir.path().join("upstream");
    let provider = cmd_eval(&upstream).map_err(|e| e.to_string())?.report;
    ensure(engine == provider, || format!("identity {engine:?} vs provider order {provider:?}"))?;
    Ok(format!("oracle HR@10 1.0; identity equals provider order (HR {:.4}, NDCG {:.4})", provider.hr, provider.ndcg))
}

fn traces(replies: &[&str], runs: usize, mc: usize) -> Result<Vec<TraceRecord>, String> {
    let registry = NodeRegistry::standard();
    (0..runs)
        .map(|i| {
            let out = scripted(replies, &registry, &GraphConfig::with_k(2, mc), 4)?;
            Ok(TraceRecord::new(&UserId::new(format!("u{i}")).unwrap(), &Goal::new(""), &out))
        })
        .collect()
}

fn path_analytics() -> Result<String, String> {
    let order: Vec<String> = ["Accuracy", "Diversity", "Fairness"].map(String::from).to_vec();
    let adf = ["NEXT: Diversity", "NEXT: Fairness", "NEXT: Stop"];
    let s = PathStats::from_records(&traces(&adf, 100, 5)?, &order).map_err(|e| e.to_string())?;
    ensure(s.fav_path == "A-D-F", || format!("fav path {}", s.fav_path))?;
    close(s.fav_prop, 1.0, "Fav Prop")?;
    close(s.ave_length, 3.0, "Ave Length")?;
    close(s.max_stop_prop, 0.0, "Max Stop Prop")?;

    let mut mix = traces(&adf, 60, 5)?;
    mix.extend(traces(&["NEXT: Fairness", "NEXT: Stop"], 40, 5)?);
    let m = PathStats::from_records(&mix, &order).map_err(|e| e.to_string())?;
    close(m.fav_prop, 0.6, "mix Fav Prop")?;
    close(m.ave_length, 2.6, "mix Ave Length")?;
    let used: Vec<f64> = m.node_used.iter().map(|(_, v)| *v).collect();
    for (got, want) in used.iter().zip([100.0 / 260.0, 60.0 / 260.0, 100.0 / 260.0]) {
        close(*got, want, "mix Node Used")?;
    }

    // MC = 3 ends A-A-B-D on the budget
    let aabd = traces(&["NEXT: Accuracy", "NEXT: Backward", "NEXT: Diversity", "NEXT: Fairness"], 10, 3)?;
    let b = PathStats::from_records(&aabd, &order).map_err(|e| e.to_string())?;
    ensure(b.fav_path == "A-A-B-D", || format!("fav path {}", b.fav_path))?;
    close(b.max_stop_prop, 1.0, "Max Stop Prop")?;
    close(b.ave_length, 3.0, "A-A-B-D Ave Length")?;

    let table = m.to_table();
    for col in ["Node Used", "Fav Path", "Fav Prop", "Ave Length", "Max Stop Prop", "A-D-F"] {
        ensure(table.contains(col), || format!("table lacks {col}:\n{table}"))?;
    }
    ensure(b.to_table().contains("A-A-B-D"), || "A-A-B-D not rendered".into())?;
    Ok("A-D-F x100, 60/40 mix and A-A-B-D aggregates match hand values".into())
}

fn backward_semantics() -> Result<String, String> {
    let registry = NodeRegistry::standard();
    let config = GraphConfig::with_k(4, 5);
    let out = scripted(
        &["NEXT: Diversity\nRANKING: i0,i1,i2,i3", "NEXT: Backward\nRANKING: i3,i2,i1,i0", "NEXT: Stop"],
        &registry,
        &config,
        4,
    )?;
    ensure(out.path_signature() == "A-D-B", || format!("path {}", out.path_signature()))?;
    ensure(out.pool.len() == 1 && out.pool.steps()[0].node.as_str() == "Accuracy", || {
        format!("pool after pop: {:?}", out.pool.steps().iter().map(|s| s.node.as_str()).collect::<Vec<_>>())
    })?;
    ensure(out.trace[2].popped.as_ref().map(|n| n.as_str()) == Some("Diversity"), || "Diversity was not popped".into())?;

    let noop = scripted(&["NEXT: Backward\nRANKING: i1,i0,i2,i3", "NEXT: Stop"], &registry, &config, 4)?;
    ensure(noop.pool.len() == 1 && noop.trace[1].popped.is_none(), || "Backward at pool size 1 popped".into())?;
    ensure(noop.final_ranking.joined() == "i1,i0,i2,i3", || format!("final {}", noop.final_ranking.joined()))?;
    ensure(noop.stop_reason == StopReason::StopNode, || format!("stop {}", noop.stop_reason))?;
    Ok("A-D-Backward pops Diversity; Backward at size 1 is a no-op".into())
}

fn extension() -> Result<String, String> {
    let mut registry = NodeRegistry::standard();
    let id = registry.register_node("Novelty", novelty_example()).map_err(|e| e.to_string())?;
    ensure(registry.kind(&id) == Some(NodeKind::Aspect), || "Novelty is not an aspect node".into())?;
    ensure(registry.registered_names().contains("Novelty"), || "Novelty not listed".into())?;
    let out = scripted(&["NEXT: Novelty\nRANKING: i0,i1,i2,i3", "NEXT: Stop\nRANKING: i3,i2,i1,i0"], &registry, &GraphConfig::with_k(4, 5), 4)?;
    ensure(out.path_signature() == "A-N", || format!("path {}", out.path_signature()))?;
    ensure(out.stop_reason == StopReason::StopNode, || format!("stop {}", out.stop_reason))?;
    ensure(out.final_ranking.joined() == "i3,i2,i1,i0", || format!("final {}", out.final_ranking.joined()))?;
    Ok("Novelty registered, listed and reached in A-N-Stop".into())
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("desk-scale acceptance with optional live smoke", live_smoke),
        ("metric oracles", metric_oracles),
        ("baseline oracles", baseline_oracles),
        ("engine termination", termination),
        ("determinism", determinism),
        ("end-to-end sanity", end_to_end),
        ("path analytics", path_analytics),
        ("backward semantics", backward_semantics),
        ("novelty extension", extension),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", 9 - failed, 9);
    if failed > 0 {
        std::process::exit(1);
    }
}
