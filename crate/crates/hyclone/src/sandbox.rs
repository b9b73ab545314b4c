//! Runs fragments in short-lived interpreter processes.
//!
//! Every probe or call launches one runner process speaking the JSON protocol
//! documented in `runner/hyclone_runner.py`: one request object on stdin, one
//! response object on stdout. The child is made leader of its own process
//! group, gets an address-space and CPU rlimit, and the whole group is
//! killed once the call returns or the wall timeout fires, so nothing it
//! spawned outlives the call.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use hyclone_core::{
    collect_valid_inputs, CandidateSource, CollectError, Collected, ExecutionOutcome,
    InputRunner, OutcomeKind, Origin, TestInput,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wait_timeout::ChildExt;

use crate::error::ConfigError;

/// Source of the runner shim, passed to the interpreter with `-c`.
pub const RUNNER_SOURCE: &str = include_str!("../runner/hyclone_runner.py");

const STDERR_CAP: usize = 16 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecLimits {
    /// Seconds before the process group is killed.
    pub wall_timeout: f64,
    /// Address-space limit in bytes.
    pub memory_limit: u64,
    pub max_output_bytes: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            wall_timeout: 5.0,
            memory_limit: 256 * 1024 * 1024,
            max_output_bytes: 1024 * 1024,
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.wall_timeout > 0.0 && self.wall_timeout.is_finite()) {
            return Err(ConfigError::Invalid("wall_timeout must be > 0".into()));
        }
        if self.memory_limit == 0 || self.max_output_bytes == 0 {
            return Err(ConfigError::Invalid(
                "memory_limit and max_output_bytes must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerConfig {
    pub python: PathBuf,
    /// Run this shim file instead of the bundled one.
    pub shim_path: Option<PathBuf>,
    /// Extra environment for runner processes.
    pub env: BTreeMap<String, String>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            python: PathBuf::from("python3"),
            shim_path: None,
            env: BTreeMap::new(),
        }
    }
}

/// A fragment's callable as reported by a probe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntrypointInfo {
    pub name: String,
    pub arity: usize,
}

/// Why a probe did not yield an entrypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct ProbeFailure {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct LaunchCounters {
    probes: AtomicUsize,
    calls: AtomicUsize,
}

impl LaunchCounters {
    pub fn probes(&self) -> usize {
        self.probes.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn total(&self) -> usize {
        self.probes() + self.calls()
    }
}

enum Exit {
    Code(i32),
    Signal(i32),
    TimedOut,
}

struct RawRun {
    exit: Exit,
    stdout: Vec<u8>,
    overflow: bool,
    stderr: String,
    duration: f64,
}

#[derive(Debug, Clone)]
pub struct Sandbox {
    runner: RunnerConfig,
    limits: ExecLimits,
    counters: Arc<LaunchCounters>,
}

fn read_capped(mut r: impl Read, cap: usize) -> (Vec<u8>, bool) {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    let mut overflow = false;
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(k) => {
                let room = cap.saturating_sub(kept.len());
                if k > room {
                    overflow = true;
                }
                kept.extend_from_slice(&buf[..k.min(room)]);
            }
        }
    }
    (kept, overflow)
}

fn kill_group(child: &Child) {
    // the child leads its own group, so -pid reaches everything it spawned
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
}

impl Sandbox {
    pub fn new(runner: RunnerConfig, limits: ExecLimits) -> Self {
        Self {
            runner,
            limits,
            counters: Arc::new(LaunchCounters::default()),
        }
    }

    pub fn limits(&self) -> &ExecLimits {
        &self.limits
    }

    pub fn counters(&self) -> &Arc<LaunchCounters> {
        &self.counters
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new(&self.runner.python);
        cmd.args(["-S", "-s", "-B"]);
        match &self.runner.shim_path {
            Some(path) => cmd.arg(path),
            None => cmd.arg("-c").arg(RUNNER_SOURCE),
        };
        cmd.env("PYTHONHASHSEED", "0")
            .envs(&self.runner.env)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);

        let mem = self.limits.memory_limit as libc::rlim_t;
        let cpu = self.limits.wall_timeout.ceil() as libc::rlim_t + 1;
        unsafe {
            cmd.pre_exec(move || {
                let set = |res, soft, hard| {
                    let lim = libc::rlimit {
                        rlim_cur: soft,
                        rlim_max: hard,
                    };
                    libc::setrlimit(res, &lim)
                };
                set(libc::RLIMIT_AS, mem, mem);
                set(libc::RLIMIT_CPU, cpu, cpu + 1);
                set(libc::RLIMIT_CORE, 0, 0);
                Ok(())
            });
        }
        cmd
    }

    fn launch(&self, request: &Value) -> RawRun {
        let start = Instant::now();
        let failed = |msg: String| RawRun {
            exit: Exit::Code(-1),
            stdout: Vec::new(),
            overflow: false,
            stderr: msg,
            duration: start.elapsed().as_secs_f64(),
        };
        let mut child = match self.command().spawn() {
            Ok(c) => c,
            Err(e) => return failed(format!("cannot launch {}: {e}", self.runner.python.display())),
        };

        let payload = serde_json::to_vec(request).expect("request serializes");
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = thread::spawn(move || {
            // the child may exit without reading; a broken pipe is fine
            let _ = stdin.write_all(&payload);
        });
        let cap = self.limits.max_output_bytes;
        let stdout = child.stdout.take().expect("piped stdout");
        let out_reader = thread::spawn(move || read_capped(stdout, cap));
        let stderr = child.stderr.take().expect("piped stderr");
        let err_reader = thread::spawn(move || read_capped(stderr, STDERR_CAP));

        let timeout = Duration::from_secs_f64(self.limits.wall_timeout);
        let exit = match child.wait_timeout(timeout) {
            Ok(Some(status)) => match (status.code(), status.signal()) {
                (Some(code), _) => Exit::Code(code),
                (None, Some(sig)) => Exit::Signal(sig),
                _ => Exit::Code(-1),
            },
            Ok(None) => Exit::TimedOut,
            Err(e) => {
                kill_group(&child);
                let _ = child.wait();
                return failed(format!("wait failed: {e}"));
            }
        };
        kill_group(&child);
        let _ = child.wait();
        let _ = writer.join();
        let (stdout, overflow) = out_reader.join().unwrap_or_default();
        let (stderr, _) = err_reader.join().unwrap_or_default();

        RawRun {
            exit,
            stdout,
            overflow,
            stderr: String::from_utf8_lossy(&stderr).into_owned(),
            duration: start.elapsed().as_secs_f64(),
        }
    }

    /// Finds the callable of `source` and its positional arity.
    pub fn probe(&self, source: &str, entrypoint: Option<&str>) -> Result<EntrypointInfo, ProbeFailure> {
        self.counters.probes.fetch_add(1, Ordering::SeqCst);
        let raw = self.launch(&json!({
            "mode": "probe",
            "source": source,
            "entrypoint": entrypoint,
        }));
        match interpret(&raw, &self.limits) {
            Interpreted::Probe(info) => Ok(info),
            Interpreted::Outcome(o) => Err(ProbeFailure {
                kind: o.error_kind.unwrap_or_else(|| "ProtocolError".into()),
                message: o.error_message.unwrap_or_default(),
            }),
            Interpreted::Value(_) => Err(ProbeFailure {
                kind: "ProtocolError".into(),
                message: "probe answered with a call result".into(),
            }),
        }
    }

    /// Runs `source`'s entrypoint on one argument tuple.
    pub fn execute(&self, source: &str, entry: &EntrypointInfo, args: &[Value]) -> ExecutionOutcome {
        self.counters.calls.fetch_add(1, Ordering::SeqCst);
        let raw = self.launch(&json!({
            "mode": "call",
            "source": source,
            "entrypoint": entry.name,
            "args": args,
        }));
        match interpret(&raw, &self.limits) {
            Interpreted::Value(v) => ExecutionOutcome::ok(v, raw.duration),
            Interpreted::Outcome(o) => o,
            Interpreted::Probe(_) => ExecutionOutcome::failure(
                OutcomeKind::ProtocolError,
                "ProtocolError",
                "call answered with a probe result",
                raw.duration,
            ),
        }
    }

    pub fn execute_input(&self, source: &str, entry: &EntrypointInfo, input: &TestInput) -> ExecutionOutcome {
        self.execute(source, entry, &input.args)
    }

    /// Runs a batch of calls, in parallel on the current rayon pool.
    pub fn execute_batch(&self, source: &str, entry: &EntrypointInfo, batch: &[Vec<Value>]) -> Vec<ExecutionOutcome> {
        batch
            .par_iter()
            .map(|args| self.execute(source, entry, args))
            .collect()
    }

    /// Assembles exactly `n` valid inputs for one fragment.
    pub fn collect_valid_inputs<S: CandidateSource>(
        &self,
        source: &str,
        entry: &EntrypointInfo,
        n: usize,
        max_rounds: u32,
        origin: Origin,
        generator: &mut S,
    ) -> Result<Collected, CollectError<S::Error>> {
        let mut runner = FragmentRunner {
            sandbox: self,
            source,
            entry,
        };
        collect_valid_inputs(n, max_rounds, origin, generator, &mut runner)
    }
}

struct FragmentRunner<'a> {
    sandbox: &'a Sandbox,
    source: &'a str,
    entry: &'a EntrypointInfo,
}

impl InputRunner for FragmentRunner<'_> {
    fn run_batch(&mut self, batch: &[Vec<Value>]) -> Vec<ExecutionOutcome> {
        self.sandbox.execute_batch(self.source, self.entry, batch)
    }
}

enum Interpreted {
    Probe(EntrypointInfo),
    Value(Value),
    Outcome(ExecutionOutcome),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    status: String,
    // present-but-null is a fragment returning None, not a missing value
    #[serde(default, deserialize_with = "present")]
    value: Option<Value>,
    #[serde(default)]
    error_kind: Option<String>,
    #[serde(default)]
    error_message: Option<String>,
    #[serde(default)]
    entrypoint: Option<EntrypointInfo>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

fn interpret(raw: &RawRun, limits: &ExecLimits) -> Interpreted {
    let fail = |kind, error_kind: &str, message: String| {
        Interpreted::Outcome(ExecutionOutcome::failure(kind, error_kind, message, raw.duration))
    };
    let stderr_tail = || {
        let s = raw.stderr.trim();
        let start = s.len().saturating_sub(600);
        let start = (start..=s.len()).find(|i| s.is_char_boundary(*i)).unwrap_or(s.len());
        s[start..].to_string()
    };

    match raw.exit {
        Exit::TimedOut => {
            return fail(
                OutcomeKind::Timeout,
                "Timeout",
                format!("killed after {}s", limits.wall_timeout),
            )
        }
        Exit::Signal(sig) => {
            return fail(
                OutcomeKind::ResourceLimit,
                "Signal",
                format!("terminated by signal {sig}: {}", stderr_tail()),
            )
        }
        Exit::Code(_) => {}
    }
    let exit_code = match raw.exit {
        Exit::Code(c) => c,
        _ => -1,
    };
    if raw.overflow {
        return fail(
            OutcomeKind::ProtocolError,
            "ProtocolError",
            format!("output exceeds {} bytes", limits.max_output_bytes),
        );
    }

    let text = String::from_utf8_lossy(&raw.stdout);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let resp: Option<Response> = match (lines.next(), lines.next()) {
        (Some(line), None) => serde_json::from_str(line).ok(),
        _ => None,
    };
    let Some(resp) = resp else {
        return fail(
            OutcomeKind::ProtocolError,
            "ProtocolError",
            format!("malformed runner output (exit {exit_code}); stderr: {}", stderr_tail()),
        );
    };

    match (resp.status.as_str(), resp.value, resp.entrypoint) {
        ("ok", Some(v), None) => Interpreted::Value(v),
        ("probe_ok", None, Some(e)) => Interpreted::Probe(e),
        ("error", None, None) => {
            let kind = resp.error_kind.unwrap_or_else(|| "Exception".into());
            let message = resp.error_message.unwrap_or_default();
            let outcome_kind = match kind.as_str() {
                "ProtocolError" => OutcomeKind::ProtocolError,
                "MemoryError" => OutcomeKind::ResourceLimit,
                _ => OutcomeKind::RuntimeError,
            };
            fail(outcome_kind, &kind, message)
        }
        (status, _, _) => fail(
            OutcomeKind::ProtocolError,
            "ProtocolError",
            format!("unexpected runner response with status {status:?}"),
        ),
    }
}
