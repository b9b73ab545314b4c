//! End-to-end pipeline behaviour: routing, verdicts, the result store and
//! resuming.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use hyclone::corpus::{desk_corpus, Corpus};
use hyclone::error::{GatewayError, StoreError};
use hyclone::llm::{CacheMode, ChatProvider, ChatRequest, Purpose, StubProvider};
use hyclone::pipeline::{
    canonical_store_lines, latest_records, load_results, summarize, Pipeline, PipelineConfig,
    StoreRecord, RESULT_SCHEMA,
};
use hyclone_core::{CodePair, Decision, Routing, Stage};

fn config(n: usize) -> PipelineConfig {
    PipelineConfig {
        n_tests: n,
        max_rounds: 2,
        jobs: 4,
        ..PipelineConfig::default()
    }
}

fn pipeline(cfg: PipelineConfig, provider: impl ChatProvider + 'static) -> Pipeline {
    Pipeline::new(cfg, Arc::new(provider)).unwrap()
}

fn desk_pair(id: &str) -> CodePair {
    desk_corpus().get(id).unwrap().clone()
}

fn ids_in_store(path: &Path) -> Vec<String> {
    load_results(path)
        .unwrap()
        .iter()
        .map(|r| r.pair_id().to_string())
        .collect()
}

#[test]
fn executed_verdicts_on_known_pairs() {
    let p = pipeline(config(8), StubProvider::new(false));
    let v = p.detect(&desk_pair("double_add_vs_mul")).unwrap();
    assert_eq!(v.decision, Decision::Clone);
    assert_eq!(v.stage, Stage::ExecValidated);
    let s = v.scores.as_ref().unwrap();
    assert_eq!((s.s_a, s.s_b, s.n), (1.0, 1.0, 8));
    assert_eq!(v.inputs_a.as_ref().unwrap().len(), 8);
    assert_eq!(v.exec.cross_runs, 16);

    let v = p.detect(&desk_pair("sum_vs_product")).unwrap();
    assert_eq!(v.decision, Decision::NonClone);
    assert_eq!(v.stage, Stage::ExecValidated);
    assert!(v.scores.unwrap().s_a < 0.8);
}

#[test]
fn routing_skips_execution() {
    let corpus = desk_corpus();
    for (routing, screen, expect) in [
        (Routing::ValidatePositives, false, Decision::NonClone),
        (Routing::ValidateNegatives, true, Decision::Clone),
    ] {
        let cfg = PipelineConfig { routing, ..config(16) };
        let p = pipeline(cfg, StubProvider::new(screen));
        for pair in &corpus.pairs[..6] {
            let v = p.detect(pair).unwrap();
            assert_eq!((v.decision, v.stage), (expect, Stage::LlmScreen));
        }
        assert_eq!(p.sandbox().counters().total(), 0);
    }
}

#[test]
fn failing_fragment_is_undecidable_with_a_note() {
    let p = pipeline(config(4), StubProvider::new(false));
    let always_raises = CodePair::new(
        "raises",
        "def f(x):\n    raise ValueError(x)\n",
        "def g(x):\n    return x\n",
        Some(false),
    );
    let v = p.detect(&always_raises).unwrap();
    assert_eq!((v.decision, v.stage), (Decision::Undecidable, Stage::LlmScreen));
    assert!(v.note.as_deref().unwrap().contains("fragment a"), "{:?}", v.note);
    assert_eq!(v.exec.cross_runs, 0);
    assert_eq!(v.exec.rounds_a, 2);

    let broken = CodePair::new("broken", "def f(:\n", "def g(x):\n    return x\n", None);
    let v = p.detect(&broken).unwrap();
    assert_eq!(v.decision, Decision::Undecidable);
    assert!(v.note.unwrap().contains("SyntaxError"));
    assert_eq!(v.exec.launches(), 2);
}

#[test]
fn store_is_ordered_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/results.jsonl");
    let corpus = desk_corpus();
    // screen says clone and routing only executes non-clones: fast and offline
    let p = pipeline(config(16), StubProvider::new(true));

    let first = p.run_corpus_limited(&corpus, &out, Some(10)).unwrap();
    assert_eq!((first.processed, first.skipped), (10, 0));
    let header = fs::read_to_string(&out).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, format!("{{\"schema\":\"{RESULT_SCHEMA}\"}}"));

    let second = p.run_corpus(&corpus, &out).unwrap();
    assert_eq!((second.processed, second.skipped), (14, 10));
    assert_eq!(second.clone, 24);

    let ids = ids_in_store(&out);
    let expected: Vec<String> = corpus.pairs.iter().map(|p| p.id.clone()).collect();
    assert_eq!(ids, expected, "records follow corpus order with no duplicates");

    let before = fs::read(&out).unwrap();
    let third = p.run_corpus(&corpus, &out).unwrap();
    assert_eq!((third.processed, third.skipped), (0, 24));
    assert_eq!(fs::read(&out).unwrap(), before);
}

#[test]
fn torn_last_line_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let corpus = desk_corpus();
    let p = pipeline(config(16), StubProvider::new(true));
    p.run_corpus_limited(&corpus, &out, Some(3)).unwrap();
    let mut bytes = fs::read(&out).unwrap();
    bytes.extend_from_slice(br#"{"pair_id":"even_mod_vs_bitm"#);
    fs::write(&out, bytes).unwrap();

    let s = p.run_corpus(&corpus, &out).unwrap();
    assert_eq!((s.processed, s.skipped), (21, 3));
    assert_eq!(ids_in_store(&out).len(), 24);
    assert_eq!(canonical_store_lines(&out).unwrap().len(), 25);
}

#[test]
fn foreign_file_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    fs::write(&out, "{\"schema\":\"something-else\"}\n").unwrap();
    let p = pipeline(config(16), StubProvider::new(true));
    assert!(matches!(p.run_corpus(&desk_corpus(), &out), Err(StoreError::BadHeader { .. })));
}

/// Screens fine except for one pair, which fails until `healthy` is set.
struct Flaky {
    victim: &'static str,
    healthy: Arc<AtomicBool>,
}

impl ChatProvider for Flaky {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, GatewayError> {
        if let Purpose::Screen { pair } = request.purpose {
            if pair.id == self.victim && !self.healthy.load(Ordering::SeqCst) {
                return Err(GatewayError::ProviderUnavailable("HTTP 503".into()));
            }
        }
        StubProvider::new(true).complete(request)
    }
}

#[test]
fn retriable_errors_are_retried_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let mut corpus = Corpus {
        pairs: desk_corpus().pairs[..5].to_vec(),
        source_path: "subset".into(),
    };
    corpus.pairs.push(CodePair::new("empty", "", "def g():\n    return 1\n", None));
    let healthy = Arc::new(AtomicBool::new(false));
    let mut cfg = config(16);
    cfg.model.max_retries = 0;
    let p = pipeline(
        cfg,
        Flaky {
            victim: "triangular_loop_vs_formula",
            healthy: Arc::clone(&healthy),
        },
    );

    let s = p.run_corpus(&corpus, &out).unwrap();
    assert_eq!((s.clone, s.errors), (4, 2));

    healthy.store(true, Ordering::SeqCst);
    let s = p.run_corpus(&corpus, &out).unwrap();
    // the empty fragment is a permanent error and stays
    assert_eq!((s.processed, s.clone, s.errors), (1, 5, 1));

    let records = load_results(&out).unwrap();
    assert_eq!(records.len(), 7);
    let latest = latest_records(&records);
    assert!(matches!(latest["triangular_loop_vs_formula"], StoreRecord::Verdict(_)));
    assert!(matches!(latest["empty"], StoreRecord::Error(e) if !e.retriable));
    // the first run's lines alone still show the old error
    assert_eq!(summarize(&corpus, &records[..6]).errors, 2);
}

#[test]
fn replayed_run_matches_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let corpus = Corpus {
        pairs: desk_corpus()
            .pairs
            .into_iter()
            .filter(|p| ["double_add_vs_mul", "max_vs_min", "gcd_vs_lcm"].contains(&p.id.as_str()))
            .collect(),
        source_path: "subset".into(),
    };
    let cfg = |mode| PipelineConfig {
        cache_mode: mode,
        cache_dir: Some(cache.clone()),
        ..config(6)
    };

    let recorded = dir.path().join("rec.jsonl");
    pipeline(cfg(CacheMode::Record), StubProvider::new(false))
        .run_corpus(&corpus, &recorded)
        .unwrap();

    struct Offline;
    impl ChatProvider for Offline {
        fn complete(&self, _: &ChatRequest<'_>) -> Result<String, GatewayError> {
            Err(GatewayError::ProviderUnavailable("offline".into()))
        }
    }
    let replayed = dir.path().join("rep.jsonl");
    let p = pipeline(cfg(CacheMode::Replay), Offline);
    let s = p.run_corpus(&corpus, &replayed).unwrap();
    assert_eq!(s.errors, 0);
    assert_eq!(p.gateway().provider_calls(), 0);
    assert_eq!(canonical_store_lines(&recorded).unwrap(), canonical_store_lines(&replayed).unwrap());

    let decisions: HashSet<(String, Decision)> = load_results(&replayed)
        .unwrap()
        .into_iter()
        .filter_map(|r| match r {
            StoreRecord::Verdict(v) => Some((v.pair_id.clone(), v.decision)),
            StoreRecord::Error(_) => None,
        })
        .collect();
    assert!(decisions.contains(&("double_add_vs_mul".to_string(), Decision::Clone)));
    assert!(decisions.contains(&("max_vs_min".to_string(), Decision::NonClone)));
}

#[test]
fn invalid_settings_are_rejected() {
    for cfg in [
        PipelineConfig { n_tests: 0, ..PipelineConfig::default() },
        PipelineConfig { theta: 0.0, ..PipelineConfig::default() },
        PipelineConfig { theta: 1.5, ..PipelineConfig::default() },
        PipelineConfig { max_rounds: 0, ..PipelineConfig::default() },
        PipelineConfig { cache_mode: CacheMode::Replay, ..PipelineConfig::default() },
    ] {
        assert!(Pipeline::new(cfg, Arc::new(StubProvider::new(true))).is_err());
    }
}
