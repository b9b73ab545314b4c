//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyclone_core::{ChallengeCondition, CodePair, Decision, Routing, UndecidablePolicy};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::load_config;
use crate::corpus::{desk_corpus, load_corpus, Corpus};
use crate::experiments::{
    adversarial, evaluate, render_adversarial, render_sweep, render_table, sweep_n, detection_row,
    write_adversarial_csv, write_sweep_csv, AdversarialReport, SweepReport, DETECTION_HEADERS,
};
use crate::llm::{CacheMode, ChatProvider, HttpProvider, ResponseCache, StubProvider, StubReeval};
use crate::pipeline::{load_results, Pipeline, PipelineConfig, StoreRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hyclone", version, about = "Semantic clone detection: model screening plus cross-execution")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify one pair or every pair of a corpus.
    Detect(DetectArgs),
    /// Run the pipeline at several test-input counts.
    Sweep(SweepArgs),
    /// Re-evaluate screen verdicts under challenge conditions.
    Adversarial(AdversarialArgs),
    /// Render tables from a result store or a saved report.
    Report(ReportArgs),
    /// Inspect or clear a response cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Run the bundled corpus offline with a stub that always answers non-clone.
    DeskCheck(DeskCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Http,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReevalKind {
    Echo,
    Invert,
    True,
    False,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoutingArg {
    ValidateNegatives,
    ValidatePositives,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    AsNegative,
    Exclude,
}

impl From<PolicyArg> for UndecidablePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::AsNegative => UndecidablePolicy::AsNegative,
            PolicyArg::Exclude => UndecidablePolicy::Exclude,
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Valid test inputs per fragment.
    #[arg(long)]
    n_tests: Option<usize>,
    /// Clone threshold for both similarity scores.
    #[arg(long)]
    theta: Option<f64>,
    /// Which screen verdicts get executed.
    #[arg(long, value_enum)]
    routing: Option<RoutingArg>,
    /// Input-generation rounds per fragment.
    #[arg(long)]
    max_rounds: Option<u32>,
    /// Model name sent to the provider.
    #[arg(long)]
    model: Option<String>,
    /// Chat-completions URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Call the provider and store responses in DIR.
    #[arg(long, value_name = "DIR", group = "cache_mode")]
    record: Option<PathBuf>,
    /// Answer only from responses stored in DIR.
    #[arg(long, value_name = "DIR", group = "cache_mode")]
    replay: Option<PathBuf>,
    /// Call the provider without caching.
    #[arg(long, group = "cache_mode")]
    live: bool,
    /// Pairs processed concurrently (0 = one per CPU).
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-execution wall timeout, seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Where model answers come from; `stub` answers offline.
    #[arg(long, value_enum, default_value = "http")]
    provider: ProviderKind,
    /// Stub screen answer.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    stub_screen: bool,
    /// Stub re-evaluation behaviour.
    #[arg(long, value_enum, default_value = "echo")]
    stub_reeval: ReevalKind,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct CorpusSource {
    /// JSONL corpus.
    #[arg(long, group = "source")]
    corpus: Option<PathBuf>,
    /// The bundled desk corpus.
    #[arg(long, group = "source")]
    desk: bool,
}

impl CorpusSource {
    fn load(&self) -> Result<Corpus, String> {
        match &self.corpus {
            Some(p) => load_corpus(p).map_err(|e| e.to_string()),
            None => Ok(desk_corpus()),
        }
    }
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// JSONL corpus.
    #[arg(long, conflicts_with_all = ["desk", "pair_a", "pair_b"])]
    corpus: Option<PathBuf>,
    /// The bundled desk corpus.
    #[arg(long, conflicts_with_all = ["pair_a", "pair_b"])]
    desk: bool,
    /// File holding fragment A of a single pair.
    #[arg(long, requires = "pair_b")]
    pair_a: Option<PathBuf>,
    /// File holding fragment B of a single pair.
    #[arg(long, requires = "pair_a")]
    pair_b: Option<PathBuf>,
    /// Result store (JSONL); required for corpus runs.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    source: CorpusSource,
    /// Comma-separated test-input counts.
    #[arg(long, value_delimiter = ',', required = true)]
    n_values: Vec<usize>,
    /// How undecidable pairs enter the metrics.
    #[arg(long, value_enum, default_value = "as-negative")]
    policy: PolicyArg,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct AdversarialArgs {
    #[command(flatten)]
    source: CorpusSource,
    /// Comma-separated subset of ST+C, ST-C, MT+C, MT-C.
    #[arg(long, value_delimiter = ',', default_value = "ST+C,ST-C,MT+C,MT-C")]
    conditions: Vec<String>,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Result store written by `detect`.
    #[arg(long, requires = "report_corpus", conflicts_with = "input")]
    results: Option<PathBuf>,
    #[command(flatten)]
    corpus: ReportCorpus,
    /// JSON report written by `sweep --json` or `adversarial --json`.
    #[arg(long, required_unless_present = "results")]
    input: Option<PathBuf>,
    /// How undecidable pairs enter the metrics.
    #[arg(long, value_enum, default_value = "as-negative")]
    policy: PolicyArg,
}

#[derive(Debug, Args)]
#[group(id = "report_corpus", multiple = false)]
struct ReportCorpus {
    /// Corpus the store was produced from.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// The store came from the desk corpus.
    #[arg(long)]
    desk: bool,
}

#[derive(Debug, Subcommand)]
enum CacheAction {
    /// List entries as JSON lines.
    Inspect {
        /// Cache directory.
        #[arg(long)]
        dir: PathBuf,
    },
    /// Delete every entry.
    Clear {
        /// Cache directory.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct DeskCheckArgs {
    /// Valid test inputs per fragment.
    #[arg(long, default_value_t = 16)]
    n_tests: usize,
    /// Pairs processed concurrently (0 = one per CPU).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

type Outcome = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Sweep(a) => sweep(a),
        Command::Adversarial(a) => adversarial_cmd(a),
        Command::Report(a) => report(a),
        Command::Cache { action } => cache(action),
        Command::DeskCheck(a) => desk_check(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

/// Config file, then flags on top.
fn build_config(c: &CommonArgs) -> Result<PipelineConfig, String> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p).map_err(|e| e.to_string())?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = c.n_tests {
        cfg.n_tests = v;
    }
    if let Some(v) = c.theta {
        cfg.theta = v;
    }
    if let Some(r) = c.routing {
        cfg.routing = match r {
            RoutingArg::ValidateNegatives => Routing::ValidateNegatives,
            RoutingArg::ValidatePositives => Routing::ValidatePositives,
        };
    }
    if let Some(v) = c.max_rounds {
        cfg.max_rounds = v;
    }
    if let Some(v) = &c.model {
        cfg.model.model_name = v.clone();
    }
    if let Some(v) = &c.endpoint {
        cfg.model.endpoint = v.clone();
    }
    if let Some(v) = c.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = c.timeout {
        cfg.limits.wall_timeout = v;
    }
    if let Some(d) = &c.record {
        cfg.cache_mode = CacheMode::Record;
        cfg.cache_dir = Some(d.clone());
    } else if let Some(d) = &c.replay {
        cfg.cache_mode = CacheMode::Replay;
        cfg.cache_dir = Some(d.clone());
    } else if c.live {
        cfg.cache_mode = CacheMode::Live;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn provider(c: &CommonArgs, cfg: &PipelineConfig) -> Arc<dyn ChatProvider> {
    match c.provider {
        ProviderKind::Http => Arc::new(HttpProvider::new(&cfg.model)),
        ProviderKind::Stub => Arc::new(StubProvider::new(c.stub_screen).with_reeval(match c.stub_reeval {
            ReevalKind::Echo => StubReeval::Echo,
            ReevalKind::Invert => StubReeval::Invert,
            ReevalKind::True => StubReeval::Always(true),
            ReevalKind::False => StubReeval::Always(false),
        })),
    }
}

/// Validates flags and builds the pipeline.
fn setup(c: &CommonArgs) -> Result<Pipeline, Failure> {
    let cfg = build_config(c).map_err(usage)?;
    let provider = provider(c, &cfg);
    Pipeline::new(cfg, provider).map_err(|e| usage(e.to_string()))
}

fn print_json(v: &impl serde::Serialize) -> Outcome {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn read_fragment(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn detect(a: DetectArgs) -> Outcome {
    let single = a.pair_a.is_some();
    if !single && a.corpus.is_none() && !a.desk {
        return Err(usage("detect needs --corpus, --desk or --pair-a/--pair-b"));
    }
    if !single && a.out.is_none() {
        return Err(usage("corpus runs need --out"));
    }
    let pipeline = setup(&a.common)?;

    if let (Some(pa), Some(pb)) = (&a.pair_a, &a.pair_b) {
        let pair = CodePair::new("pair", read_fragment(pa)?, read_fragment(pb)?, None);
        pair.validate()?;
        let verdict = pipeline.detect(&pair)?;
        if let Some(out) = &a.out {
            fs::write(out, serde_json::to_string_pretty(&verdict)? + "\n")?;
        }
        return print_json(&verdict);
    }
    let corpus = match &a.corpus {
        Some(p) => load_corpus(p)?,
        None => desk_corpus(),
    };
    let out = a.out.expect("checked above");
    let summary = pipeline.run_corpus(&corpus, &out)?;
    log::info!(
        "{} clone, {} non-clone, {} undecidable, {} errors",
        summary.clone,
        summary.non_clone,
        summary.undecidable,
        summary.errors
    );
    print_json(&summary)
}

fn write_file(path: &Path, f: impl FnOnce(fs::File) -> Result<(), Failure>) -> Outcome {
    let file = fs::File::create(path).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))?;
    f(file)
}

fn sweep(a: SweepArgs) -> Outcome {
    let corpus = a.source.load().map_err(usage)?;
    if a.n_values.contains(&0) {
        return Err(usage("--n-values entries must be at least 1"));
    }
    let pipeline = setup(&a.common)?;
    let report = sweep_n(&pipeline, &corpus, &a.n_values, a.policy.into())?;
    if let Some(p) = &a.csv {
        write_file(p, |f| Ok(write_sweep_csv(&report, f)?))?;
    }
    if let Some(p) = &a.json {
        write_file(p, |f| Ok(serde_json::to_writer_pretty(f, &report)?))?;
    }
    print!("{}", render_sweep(&report));
    Ok(())
}

fn parse_conditions(labels: &[String]) -> Result<Vec<ChallengeCondition>, String> {
    labels
        .iter()
        .map(|l| ChallengeCondition::from_label(l.trim()).ok_or_else(|| format!("unknown condition {l:?}")))
        .collect()
}

fn adversarial_cmd(a: AdversarialArgs) -> Outcome {
    let conditions = parse_conditions(&a.conditions).map_err(usage)?;
    let corpus = a.source.load().map_err(usage)?;
    let pipeline = setup(&a.common)?;
    let report = adversarial(&pipeline, &corpus, &conditions)?;
    if let Some(p) = &a.csv {
        write_file(p, |f| Ok(write_adversarial_csv(&report, f)?))?;
    }
    if let Some(p) = &a.json {
        write_file(p, |f| Ok(serde_json::to_writer_pretty(f, &report)?))?;
    }
    print!("{}", render_adversarial(&report));
    Ok(())
}

fn report(a: ReportArgs) -> Outcome {
    if let Some(input) = &a.input {
        let v: Value = serde_json::from_str(&fs::read_to_string(input)?)?;
        if v.get("rows").is_some() {
            let r: SweepReport = serde_json::from_value(v)?;
            print!("{}", render_sweep(&r));
        } else if v.get("conditions").is_some() {
            let r: AdversarialReport = serde_json::from_value(v)?;
            print!("{}", render_adversarial(&r));
        } else {
            return Err(Failure::Runtime(format!("{} is not a sweep or adversarial report", input.display())));
        }
        return Ok(());
    }
    let results = a.results.expect("clap requires results or input");
    let corpus = match &a.corpus.corpus {
        Some(p) => load_corpus(p)?,
        None => desk_corpus(),
    };
    let records = load_results(&results)?;
    let latest = crate::pipeline::latest_records(&records);
    let mut screen = Vec::with_capacity(corpus.len());
    let mut full = Vec::with_capacity(corpus.len());
    for pair in &corpus.pairs {
        match latest.get(pair.id.as_str()) {
            Some(StoreRecord::Verdict(v)) => {
                screen.push(Decision::from(v.screen.is_clone));
                full.push(v.decision);
            }
            _ => {
                screen.push(Decision::Undecidable);
                full.push(Decision::Undecidable);
            }
        }
    }
    let policy = a.policy.into();
    let base = evaluate(&corpus, &screen, policy)?;
    let hy = evaluate(&corpus, &full, policy)?;
    print!(
        "{}",
        render_table(
            &DETECTION_HEADERS,
            &[detection_row("Baseline", &base.metrics), detection_row("HyClone", &hy.metrics)]
        )
    );
    eprintln!(
        "HyClone: tp={} fp={} fn={} tn={} undecidable={}",
        hy.matrix.tp, hy.matrix.fp, hy.matrix.fn_, hy.matrix.tn, hy.undecidable
    );
    Ok(())
}

fn cache(action: CacheAction) -> Outcome {
    match action {
        CacheAction::Inspect { dir } => {
            let cache = ResponseCache::new(dir);
            let mut out = io::stdout().lock();
            for e in cache.entries()? {
                let line = json!({
                    "key": e.key,
                    "model": e.model,
                    "temperature": e.temperature,
                    "messages": e.messages.len(),
                    "response_chars": e.response.chars().count(),
                    "recorded_at": e.recorded_at,
                });
                writeln!(out, "{line}")?;
            }
        }
        CacheAction::Clear { dir } => {
            let removed = ResponseCache::new(dir).clear()?;
            eprintln!("removed {removed} entries");
        }
    }
    Ok(())
}

fn desk_check(a: DeskCheckArgs) -> Outcome {
    let cfg = PipelineConfig {
        n_tests: a.n_tests,
        jobs: a.jobs,
        ..PipelineConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let pipeline = Pipeline::new(cfg, Arc::new(StubProvider::new(false)))?;
    let corpus = desk_corpus();
    let started = Instant::now();
    let verdicts = pipeline.install(|| {
        corpus
            .pairs
            .par_iter()
            .map(|p| pipeline.detect(p))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let decisions: Vec<Decision> = verdicts.iter().map(|v| v.decision).collect();
    let eval = evaluate(&corpus, &decisions, UndecidablePolicy::AsNegative)?;
    for (v, p) in verdicts.iter().zip(&corpus.pairs) {
        let s = v.scores.as_ref();
        log::info!(
            "{:<32} label={:<5} decision={:?} s_a={:.3} s_b={:.3}",
            p.id,
            p.label.unwrap_or(false),
            v.decision,
            s.map_or(f64::NAN, |s| s.s_a),
            s.map_or(f64::NAN, |s| s.s_b)
        );
    }
    eprint!("{}", render_table(&DETECTION_HEADERS, &[detection_row("desk", &eval.metrics)]));
    eprintln!(
        "{} pairs, {} launches, {:.1}s",
        corpus.len(),
        pipeline.sandbox().counters().total(),
        started.elapsed().as_secs_f64()
    );
    print_json(&json!({ "matrix": eval.matrix, "metrics": eval.metrics, "undecidable": eval.undecidable }))
}
