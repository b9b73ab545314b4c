//! Per-pair two-stage detection and resumable corpus runs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Instant;

use hyclone_core::{
    classify, score_pair, CodePair, CollectError, Collected, CrossExecution, Decision,
    MatchConfig, Origin, Routing, ScreenVerdict, SimilarityScores, Stage, TestInput,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Corpus;
use crate::error::{ConfigError, GatewayError, StoreError};
use crate::llm::{CacheMode, ChatProvider, Gateway, GatewaySource, ModelConfig, ResponseCache};
use crate::sandbox::{EntrypointInfo, ExecLimits, RunnerConfig, Sandbox};

pub const RESULT_SCHEMA: &str = "hyclone-result-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n_tests: usize,
    pub theta: f64,
    pub routing: Routing,
    pub max_rounds: u32,
    /// Pairs processed concurrently; 0 means one per CPU.
    pub jobs: usize,
    pub cache_mode: CacheMode,
    pub cache_dir: Option<PathBuf>,
    pub limits: ExecLimits,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub model: ModelConfig,
    pub runner: RunnerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_tests: hyclone_core::DEFAULT_N_TESTS,
            theta: hyclone_core::DEFAULT_THETA,
            routing: Routing::default(),
            max_rounds: 5,
            jobs: 0,
            cache_mode: CacheMode::default(),
            cache_dir: None,
            limits: ExecLimits::default(),
            matching: MatchConfig::default(),
            model: ModelConfig::default(),
            runner: RunnerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_tests == 0 {
            return Err(ConfigError::Invalid("n_tests must be at least 1".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(ConfigError::Invalid("theta must be in (0, 1]".into()));
        }
        if self.max_rounds == 0 {
            return Err(ConfigError::Invalid("max_rounds must be at least 1".into()));
        }
        self.matching
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.limits.validate()?;
        self.model.validate()
    }
}

/// Process launches and loop bookkeeping behind one verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecStats {
    pub probes: usize,
    /// Runs of each fragment on its own candidate inputs, discarded ones included.
    pub own_runs: usize,
    pub cross_runs: usize,
    pub discarded: usize,
    pub duplicates_dropped: usize,
    pub rounds_a: u32,
    pub rounds_b: u32,
}

impl ExecStats {
    pub fn launches(&self) -> usize {
        self.probes + self.own_runs + self.cross_runs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pair_id: String,
    pub decision: Decision,
    pub stage: Stage,
    pub screen: ScreenVerdict,
    pub scores: Option<SimilarityScores>,
    pub inputs_a: Option<Vec<TestInput>>,
    pub inputs_b: Option<Vec<TestInput>>,
    pub exec: ExecStats,
    /// Why an undecidable verdict could not be decided.
    pub note: Option<String>,
    /// Seconds.
    pub wall_time: f64,
}

/// A pair that could not be processed at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairError {
    pub pair_id: String,
    pub error: String,
    pub retriable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StoreRecord {
    Verdict(Box<Verdict>),
    Error(PairError),
}

impl StoreRecord {
    pub fn pair_id(&self) -> &str {
        match self {
            StoreRecord::Verdict(v) => &v.pair_id,
            StoreRecord::Error(e) => &e.pair_id,
        }
    }

    /// Whether a resumed run leaves this pair alone.
    fn is_final(&self) -> bool {
        match self {
            StoreRecord::Verdict(_) => true,
            StoreRecord::Error(e) => !e.retriable,
        }
    }
}

/// Everything a stage-2 run produced. `usable` is how many leading inputs
/// of each set were cross-executed; `cross` covers exactly that prefix.
#[derive(Debug, Clone)]
pub struct CrossRun {
    pub cross: CrossExecution,
    pub usable: usize,
    pub stats: ExecStats,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub pairs: usize,
    /// Pairs processed by this invocation.
    pub processed: usize,
    /// Pairs already final in the store.
    pub skipped: usize,
    pub clone: usize,
    pub non_clone: usize,
    pub undecidable: usize,
    pub errors: usize,
    pub llm_screen: usize,
    pub exec_validated: usize,
    pub launches: usize,
    pub wall_time_secs: u64,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    gateway: Gateway,
    sandbox: Sandbox,
    pool: rayon::ThreadPool,
}

fn collect_error_note(which: &str, e: &CollectError<GatewayError>) -> String {
    match e {
        CollectError::InsufficientValidInputs { valid_count, partial } => format!(
            "fragment {which}: only {valid_count} valid inputs after {} rounds",
            partial.rounds
        ),
        other => format!("fragment {which}: {other}"),
    }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, provider: Arc<dyn ChatProvider>) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let cache = cfg.cache_dir.as_ref().map(ResponseCache::new);
        let gateway = Gateway::new(provider, cfg.model.clone(), cfg.cache_mode, cache)?;
        let sandbox = Sandbox::new(cfg.runner.clone(), cfg.limits);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
        Ok(Self {
            cfg,
            gateway,
            sandbox,
            pool,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn sandbox(&self) -> &Sandbox {
        &self.sandbox
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    pub fn screen(&self, pair: &CodePair) -> Result<ScreenVerdict, GatewayError> {
        self.gateway.classify_clone(pair)
    }

    fn collect(
        &self,
        source: &str,
        entry: &EntrypointInfo,
        n: usize,
        origin: Origin,
    ) -> Result<Collected, CollectError<GatewayError>> {
        let mut gen = GatewaySource {
            gateway: &self.gateway,
            fragment: source,
            entry,
            origin,
        };
        self.sandbox
            .collect_valid_inputs(source, entry, n, self.cfg.max_rounds, origin, &mut gen)
    }

    /// Collects up to `n` valid inputs per fragment and cross-executes the
    /// longest prefix both sets share. With `require_full`, nothing is
    /// cross-executed unless both sets reach `n`.
    pub fn cross_run(&self, pair: &CodePair, n: usize, require_full: bool) -> Result<CrossRun, GatewayError> {
        let mut stats = ExecStats::default();
        let empty = |stats: ExecStats, note: String| CrossRun {
            cross: CrossExecution::default(),
            usable: 0,
            stats,
            note: Some(note),
        };

        let (probe_a, probe_b) = rayon::join(
            || self.sandbox.probe(&pair.fragment_a, None),
            || self.sandbox.probe(&pair.fragment_b, None),
        );
        stats.probes = 2;
        let (entry_a, entry_b) = match (probe_a, probe_b) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) => return Ok(empty(stats, format!("fragment a: probe failed: {e}"))),
            (_, Err(e)) => return Ok(empty(stats, format!("fragment b: probe failed: {e}"))),
        };

        let (got_a, got_b) = rayon::join(
            || self.collect(&pair.fragment_a, &entry_a, n, Origin::FromA),
            || self.collect(&pair.fragment_b, &entry_b, n, Origin::FromB),
        );
        let mut notes = Vec::new();
        let mut settle = |which: &str, got: Result<Collected, CollectError<GatewayError>>| {
            match got {
                Ok(c) => Ok(c),
                Err(CollectError::Source(e)) => Err(e),
                Err(e) => {
                    notes.push(collect_error_note(which, &e));
                    match e {
                        CollectError::InsufficientValidInputs { partial, .. } => Ok(partial),
                        _ => Ok(Collected::default()),
                    }
                }
            }
        };
        let col_a = settle("a", got_a)?;
        let col_b = settle("b", got_b)?;
        for c in [&col_a, &col_b] {
            stats.own_runs += c.executions();
            stats.discarded += c.discarded.len();
            stats.duplicates_dropped += c.duplicates_dropped;
        }
        stats.rounds_a = col_a.rounds;
        stats.rounds_b = col_b.rounds;

        let usable = col_a.valid.len().min(col_b.valid.len());
        let note = (!notes.is_empty()).then(|| notes.join("; "));
        if usable == 0 || (require_full && usable < n) {
            return Ok(CrossRun {
                usable: 0,
                ..empty(stats, note.unwrap_or_default())
            });
        }

        let inputs_a: Vec<TestInput> = col_a.inputs().into_iter().take(usable).collect();
        let inputs_b: Vec<TestInput> = col_b.inputs().into_iter().take(usable).collect();
        let args_a: Vec<Vec<Value>> = inputs_a.iter().map(|t| t.args.clone()).collect();
        let args_b: Vec<Vec<Value>> = inputs_b.iter().map(|t| t.args.clone()).collect();
        let (b_on_a, a_on_b) = rayon::join(
            || self.sandbox.execute_batch(&pair.fragment_b, &entry_b, &args_a),
            || self.sandbox.execute_batch(&pair.fragment_a, &entry_a, &args_b),
        );
        stats.cross_runs = 2 * usable;

        let cross = CrossExecution {
            inputs_a,
            inputs_b,
            a_on_a: col_a.outcomes().into_iter().take(usable).collect(),
            a_on_b,
            b_on_a,
            b_on_b: col_b.outcomes().into_iter().take(usable).collect(),
        };
        Ok(CrossRun {
            cross,
            usable,
            stats,
            note,
        })
    }

    /// Scores a cross run at `n` and builds the verdict. Fewer than `n`
    /// usable inputs makes the pair undecidable.
    pub fn verdict_from_cross(
        &self,
        pair: &CodePair,
        screen: ScreenVerdict,
        run: &CrossRun,
        n: usize,
        started: Instant,
    ) -> Verdict {
        let mut verdict = Verdict {
            pair_id: pair.id.clone(),
            decision: Decision::Undecidable,
            stage: Stage::LlmScreen,
            screen,
            scores: None,
            inputs_a: None,
            inputs_b: None,
            exec: run.stats.clone(),
            note: run.note.clone(),
            wall_time: 0.0,
        };
        if run.usable >= n {
            let cross = run.cross.prefix(n);
            let scores = score_pair(&cross, &self.cfg.matching).expect("aligned by construction");
            verdict.decision = Decision::from(classify(&scores, self.cfg.theta));
            verdict.stage = Stage::ExecValidated;
            verdict.scores = Some(scores);
            verdict.inputs_a = Some(cross.inputs_a);
            verdict.inputs_b = Some(cross.inputs_b);
            verdict.note = None;
        } else if verdict.note.is_none() {
            verdict.note = Some(format!("only {} usable inputs, need {n}", run.usable));
        }
        verdict.wall_time = started.elapsed().as_secs_f64();
        verdict
    }

    /// Screen-only verdict for pairs routing does not send to execution.
    pub fn screen_verdict(&self, pair: &CodePair, screen: ScreenVerdict, started: Instant) -> Verdict {
        Verdict {
            pair_id: pair.id.clone(),
            decision: self.cfg.routing.screen_decision(),
            stage: Stage::LlmScreen,
            screen,
            scores: None,
            inputs_a: None,
            inputs_b: None,
            exec: ExecStats::default(),
            note: None,
            wall_time: started.elapsed().as_secs_f64(),
        }
    }

    pub fn detect(&self, pair: &CodePair) -> Result<Verdict, GatewayError> {
        self.pool.install(|| self.detect_inner(pair))
    }

    fn detect_inner(&self, pair: &CodePair) -> Result<Verdict, GatewayError> {
        let started = Instant::now();
        let screen = self.screen(pair)?;
        if !self.cfg.routing.needs_execution(screen.is_clone) {
            return Ok(self.screen_verdict(pair, screen, started));
        }
        let n = self.cfg.n_tests;
        let run = self.cross_run(pair, n, true)?;
        Ok(self.verdict_from_cross(pair, screen, &run, n, started))
    }

    fn record_for(&self, pair: &CodePair) -> StoreRecord {
        match self.detect_inner(pair) {
            Ok(v) => StoreRecord::Verdict(Box::new(v)),
            Err(e) => {
                log::warn!("pair {}: {e}", pair.id);
                StoreRecord::Error(PairError {
                    pair_id: pair.id.clone(),
                    error: e.to_string(),
                    retriable: e.is_retriable(),
                })
            }
        }
    }

    /// Runs every pair not yet final in the store at `out`.
    pub fn run_corpus(&self, corpus: &Corpus, out: &Path) -> Result<RunSummary, StoreError> {
        self.run_corpus_limited(corpus, out, None)
    }

    /// Like [`run_corpus`](Self::run_corpus) but stops after `max_pairs`
    /// new pairs, which is how an interrupted run looks on disk.
    pub fn run_corpus_limited(
        &self,
        corpus: &Corpus,
        out: &Path,
        max_pairs: Option<usize>,
    ) -> Result<RunSummary, StoreError> {
        let started = Instant::now();
        let launches_before = self.sandbox.counters().total();
        let existing = prepare_store(out)?;
        let done: HashSet<&str> = existing
            .iter()
            .filter(|r| r.is_final())
            .map(StoreRecord::pair_id)
            .collect();
        let mut todo: Vec<&CodePair> = corpus
            .pairs
            .iter()
            .filter(|p| !done.contains(p.id.as_str()))
            .collect();
        let skipped = corpus.len() - todo.len();
        if let Some(max) = max_pairs {
            todo.truncate(max);
        }
        log::info!("{} pairs to run, {skipped} already in {}", todo.len(), out.display());

        let file = OpenOptions::new()
            .append(true)
            .open(out)
            .map_err(|source| StoreError::Io {
                path: out.to_path_buf(),
                source,
            })?;
        let failed = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<(usize, String)>();
        let write_result = std::thread::scope(|s| {
            let writer = s.spawn(|| ordered_writer(file, rx, &failed));
            self.pool.install(|| {
                todo.par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (i, pair)| {
                        if failed.load(Ordering::SeqCst) {
                            return;
                        }
                        let record = self.record_for(pair);
                        let line = serde_json::to_string(&record).expect("record serializes");
                        let _ = tx.send((i, line));
                    });
            });
            writer.join().expect("writer thread")
        });
        write_result.map_err(|source| StoreError::Io {
            path: out.to_path_buf(),
            source,
        })?;

        let records = load_results(out)?;
        let mut summary = summarize(corpus, &records);
        summary.processed = todo.len();
        summary.skipped = skipped;
        summary.launches = self.sandbox.counters().total() - launches_before;
        summary.wall_time_secs = started.elapsed().as_secs();
        Ok(summary)
    }
}

/// Writes lines in submission order, whatever order they arrive in.
fn ordered_writer(mut file: File, rx: mpsc::Receiver<(usize, String)>, failed: &AtomicBool) -> std::io::Result<()> {
    let mut pending = BTreeMap::new();
    let mut next = 0;
    for (i, line) in rx {
        pending.insert(i, line);
        while let Some(line) = pending.remove(&next) {
            let res = file
                .write_all(format!("{line}\n").as_bytes())
                .and_then(|_| file.flush());
            if let Err(e) = res {
                failed.store(true, Ordering::SeqCst);
                return Err(e);
            }
            next += 1;
        }
    }
    file.sync_data()
}

fn header_line() -> String {
    serde_json::json!({ "schema": RESULT_SCHEMA }).to_string()
}

/// Creates the store if needed, drops a torn final line left by a crash,
/// and returns the records already present.
fn prepare_store(path: &Path) -> Result<Vec<StoreRecord>, StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_err(e)),
    };
    if bytes.is_empty() {
        fs::write(path, format!("{}\n", header_line())).map_err(io_err)?;
        return Ok(Vec::new());
    }
    if !bytes.ends_with(b"\n") {
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        log::warn!("{}: dropping a partial last line", path.display());
        let f = OpenOptions::new().write(true).open(path).map_err(io_err)?;
        f.set_len(keep as u64).map_err(io_err)?;
        if keep == 0 {
            fs::write(path, format!("{}\n", header_line())).map_err(io_err)?;
            return Ok(Vec::new());
        }
    }
    load_results(path)
}

/// Reads a result store, checking the header.
pub fn load_results(path: &Path) -> Result<Vec<StoreRecord>, StoreError> {
    let file = File::open(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if i == 0 {
            let ok = serde_json::from_str::<Value>(&line)
                .ok()
                .and_then(|v| v.get("schema").and_then(Value::as_str).map(|s| s == RESULT_SCHEMA))
                .unwrap_or(false);
            if !ok {
                return Err(StoreError::BadHeader {
                    path: path.to_path_buf(),
                    found: line.chars().take(80).collect(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|_| StoreError::BadRecord {
            path: path.to_path_buf(),
            line_no: i + 1,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// The latest record per pair id.
pub fn latest_records(records: &[StoreRecord]) -> HashMap<&str, &StoreRecord> {
    records.iter().map(|r| (r.pair_id(), r)).collect()
}

/// Decision per corpus pair; pairs without a verdict count as undecidable.
pub fn decisions_for(corpus: &Corpus, records: &[StoreRecord]) -> Vec<Decision> {
    let latest = latest_records(records);
    corpus
        .pairs
        .iter()
        .map(|p| match latest.get(p.id.as_str()) {
            Some(StoreRecord::Verdict(v)) => v.decision,
            _ => Decision::Undecidable,
        })
        .collect()
}

pub fn summarize(corpus: &Corpus, records: &[StoreRecord]) -> RunSummary {
    let latest = latest_records(records);
    let mut s = RunSummary {
        pairs: corpus.len(),
        ..RunSummary::default()
    };
    for pair in &corpus.pairs {
        match latest.get(pair.id.as_str()) {
            Some(StoreRecord::Verdict(v)) => {
                match v.decision {
                    Decision::Clone => s.clone += 1,
                    Decision::NonClone => s.non_clone += 1,
                    Decision::Undecidable => s.undecidable += 1,
                }
                match v.stage {
                    Stage::LlmScreen => s.llm_screen += 1,
                    Stage::ExecValidated => s.exec_validated += 1,
                }
            }
            Some(StoreRecord::Error(_)) => s.errors += 1,
            None => {}
        }
    }
    s
}

/// Removes wall-clock fields (`wall_time`, `duration`, `recorded_at`)
/// so two runs can be compared.
pub fn strip_wall_clock(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for key in ["wall_time", "duration", "recorded_at"] {
                map.remove(key);
            }
            map.values_mut().for_each(strip_wall_clock);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_clock),
        _ => {}
    }
}

/// Store lines with wall-clock fields stripped, header included.
pub fn canonical_store_lines(path: &Path) -> Result<Vec<String>, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let mut v: Value = serde_json::from_str(line).map_err(|_| StoreError::BadRecord {
                path: path.to_path_buf(),
                line_no: i + 1,
            })?;
            strip_wall_clock(&mut v);
            Ok(v.to_string())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::StubProvider;
    use serde_json::json;

    fn pipeline(screen: bool, routing: Routing) -> Pipeline {
        let cfg = PipelineConfig {
            routing,
            jobs: 1,
            ..PipelineConfig::default()
        };
        Pipeline::new(cfg, Arc::new(StubProvider::new(screen))).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        for bad in [
            PipelineConfig {
                n_tests: 0,
                ..PipelineConfig::default()
            },
            PipelineConfig {
                theta: 0.0,
                ..PipelineConfig::default()
            },
            PipelineConfig {
                theta: 1.5,
                ..PipelineConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn screen_positive_skips_execution() {
        let p = pipeline(true, Routing::ValidateNegatives);
        let pair = CodePair::new("s", "def f(a, b):\n    return a + b", "def g(a, b):\n    return a * b", None);
        let v = p.detect(&pair).unwrap();
        assert_eq!((v.decision, v.stage), (Decision::Clone, Stage::LlmScreen));
        assert_eq!(p.sandbox().counters().total(), 0);
    }

    #[test]
    fn unprobeable_fragment_is_undecidable() {
        let p = pipeline(false, Routing::ValidateNegatives);
        let pair = CodePair::new("u", "x = 1", "def g(x):\n    return x", None);
        let v = p.detect(&pair).unwrap();
        assert_eq!((v.decision, v.stage), (Decision::Undecidable, Stage::LlmScreen));
        assert!(v.note.unwrap().contains("probe failed"));
        assert!(v.scores.is_none());
    }

    #[test]
    fn always_failing_fragment_is_undecidable() {
        let cfg = PipelineConfig {
            n_tests: 2,
            max_rounds: 2,
            jobs: 1,
            ..PipelineConfig::default()
        };
        let p = Pipeline::new(cfg, Arc::new(StubProvider::new(false))).unwrap();
        let pair = CodePair::new("e", "def f(x):\n    raise ValueError(x)", "def g(x):\n    return x", None);
        let v = p.detect(&pair).unwrap();
        assert_eq!(v.decision, Decision::Undecidable);
        assert!(v.note.unwrap().contains("fragment a: only 0 valid inputs after 2 rounds"));
        assert_eq!(v.exec.rounds_a, 2);
    }

    #[test]
    fn strip_removes_nested_clock_fields() {
        let mut v = json!({"wall_time": 1.0, "a": [{"duration": 2.0, "value": 3}]});
        strip_wall_clock(&mut v);
        assert_eq!(v, json!({"a": [{"value": 3}]}));
    }

    #[test]
    fn store_records_round_trip() {
        let err = StoreRecord::Error(PairError {
            pair_id: "x".into(),
            error: "down".into(),
            retriable: true,
        });
        let line = serde_json::to_string(&err).unwrap();
        assert_eq!(serde_json::from_str::<StoreRecord>(&line).unwrap(), err);
    }
}
