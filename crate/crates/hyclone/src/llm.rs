//! Model access: screening, input generation and re-evaluation, routed
//! through a provider and an optional record/replay response cache.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use hyclone_core::prompt::{
    gen_inputs_messages, parse_generated_inputs, reevaluate_messages, screen_messages,
};
use hyclone_core::{
    parse_screen_response, CandidateSource, ChallengeCondition, CodePair, Message, Origin,
    ScreenVerdict, TestInput,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, GatewayError};
use crate::sandbox::EntrypointInfo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Chat-completions URL.
    pub endpoint: String,
    pub model_name: String,
    /// Used for screening and re-evaluation.
    pub temperature: f64,
    /// Used for test-input generation.
    pub generation_temperature: f64,
    pub max_retries: u32,
    /// Seconds per HTTP request.
    pub request_timeout: f64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o-mini".into(),
            temperature: 0.0,
            generation_temperature: 0.7,
            max_retries: 3,
            request_timeout: 60.0,
            api_key_env: "HYCLONE_API_KEY".into(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, t) in [
            ("temperature", self.temperature),
            ("generation_temperature", self.generation_temperature),
        ] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be finite and >= 0")));
            }
        }
        if !(self.request_timeout > 0.0 && self.request_timeout.is_finite()) {
            return Err(ConfigError::Invalid("request_timeout must be > 0".into()));
        }
        if self.model_name.is_empty() {
            return Err(ConfigError::Invalid("model_name is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Call the provider and store every response.
    Record,
    /// Serve only from the cache; a miss is an error.
    Replay,
    /// Call the provider, bypass the cache.
    #[default]
    Live,
}

/// What a request is for. Providers that talk to a real model ignore it;
/// the stub uses it to answer without parsing prompts.
#[derive(Debug, Clone, Copy)]
pub enum Purpose<'a> {
    Screen {
        pair: &'a CodePair,
    },
    GenerateInputs {
        fragment: &'a str,
        arity: usize,
        count: usize,
        already_seen: usize,
    },
    Reevaluate {
        pair: &'a CodePair,
        prior: &'a ScreenVerdict,
        condition: ChallengeCondition,
    },
}

#[derive(Debug, Clone)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub temperature: f64,
    pub messages: Vec<Message>,
    pub purpose: Purpose<'a>,
}

impl ChatRequest<'_> {
    /// Digest of model, temperature and messages; the cache key.
    pub fn cache_key(&self) -> String {
        cache_key(self.model, self.temperature, &self.messages)
    }
}

pub fn cache_key(model: &str, temperature: f64, messages: &[Message]) -> String {
    // serde_json maps keep keys sorted, so this text is canonical
    let canonical = json!({
        "messages": messages,
        "model": model,
        "temperature": temperature,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    hex::encode(digest)
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, GatewayError>;
}

/// OpenAI-style chat-completions over HTTP(S).
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    /// Reads the key from `cfg.api_key_env`; a missing key sends no
    /// Authorization header (local servers often need none).
    pub fn new(cfg: &ModelConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: cfg.endpoint.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty()),
            agent,
        }
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, GatewayError> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => {
                return Err(GatewayError::ProviderUnavailable(format!("HTTP {status}: {text}")))
            }
            _ => return Err(GatewayError::InvalidRequest(format!("HTTP {status}: {text}"))),
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::ProviderUnavailable(format!("response is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::ProviderUnavailable("response has no choices[0].message.content".into()))
    }
}

/// How the stub answers re-evaluation requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubReeval {
    Echo,
    Invert,
    Always(bool),
}

/// Offline provider with fixed, deterministic answers.
///
/// Generated inputs are non-negative integers in `0..=30`. Each fragment
/// gets its own pseudo-random walk over that range (seeded from a hash of
/// its text) that visits all 31 values before repeating, so the first 31
/// arity-1 candidates are distinct.
#[derive(Debug, Clone)]
pub struct StubProvider {
    pub screen: bool,
    pub reeval: StubReeval,
}

const STUB_RANGE: u64 = 31;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl StubProvider {
    pub fn new(screen: bool) -> Self {
        Self {
            screen,
            reeval: StubReeval::Echo,
        }
    }

    pub fn with_reeval(mut self, reeval: StubReeval) -> Self {
        self.reeval = reeval;
        self
    }

    /// Argument tuple number `k` for `fragment`.
    pub fn stub_args(fragment: &str, arity: usize, k: usize) -> Vec<Value> {
        let seed = fnv1a(fragment.as_bytes());
        (0..arity)
            .map(|j| {
                let h = seed.rotate_left(17 * j as u32);
                // 31 is prime, so any step in 1..=30 cycles the full range
                let step = 1 + h % (STUB_RANGE - 1);
                let offset = (h >> 8) % STUB_RANGE;
                json!((offset + step * k as u64) % STUB_RANGE)
            })
            .collect()
    }
}

fn polarity(is_clone: bool) -> &'static str {
    if is_clone {
        "True"
    } else {
        "False"
    }
}

impl ChatProvider for StubProvider {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, GatewayError> {
        Ok(match request.purpose {
            Purpose::Screen { .. } => polarity(self.screen).to_string(),
            Purpose::Reevaluate { prior, .. } => {
                let answer = match self.reeval {
                    StubReeval::Echo => prior.is_clone,
                    StubReeval::Invert => !prior.is_clone,
                    StubReeval::Always(b) => b,
                };
                polarity(answer).to_string()
            }
            Purpose::GenerateInputs {
                fragment,
                arity,
                count,
                already_seen,
            } => {
                let inputs: Vec<Vec<Value>> = (already_seen..already_seen + count)
                    .map(|k| Self::stub_args(fragment, arity, k))
                    .collect();
                format!(
                    "Here are the inputs:\n{}\n",
                    serde_json::to_string(&inputs).expect("inputs serialize")
                )
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
    pub response: String,
    /// Unix seconds.
    pub recorded_at: f64,
}

/// Directory of `<key>.json` files, one per recorded response.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Arc<Mutex<()>>,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            write_lock: Arc::new(Mutex::new(())),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, GatewayError> {
        match fs::read(self.path(key)) {
            Ok(bytes) => {
                let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| {
                    GatewayError::Cache(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("corrupt cache entry {key}: {e}"),
                    ))
                })?;
                Ok(Some(entry))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), GatewayError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(".{}.tmp", entry.key));
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, entry).map_err(std::io::Error::from)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path(&entry.key))?;
        Ok(())
    }

    /// All entries, sorted by key. Unreadable files are skipped.
    pub fn entries(&self) -> Result<Vec<CacheEntry>, GatewayError> {
        let mut out = Vec::new();
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for item in rd {
            let path = item?.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if path.extension().is_some_and(|e| e == "json") && !stem.starts_with('.') {
                if let Ok(Some(entry)) = self.get(stem) {
                    out.push(entry);
                }
            }
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }

    /// Removes every entry; returns how many were removed.
    pub fn clear(&self) -> Result<usize, GatewayError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(e.into()),
        };
        let mut removed = 0;
        for item in rd {
            let path = item?.path();
            if path.extension().is_some_and(|e| e == "json" || e == "tmp") {
                fs::remove_file(&path)?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}

pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    model: ModelConfig,
    cache: Option<ResponseCache>,
    mode: CacheMode,
    provider_calls: AtomicUsize,
    retry_base: Duration,
}

impl Gateway {
    /// Record and replay modes need a cache.
    pub fn new(
        provider: Arc<dyn ChatProvider>,
        model: ModelConfig,
        mode: CacheMode,
        cache: Option<ResponseCache>,
    ) -> Result<Self, ConfigError> {
        if mode != CacheMode::Live && cache.is_none() {
            return Err(ConfigError::Invalid(format!("{mode:?} mode needs a cache directory")));
        }
        model.validate()?;
        Ok(Self {
            provider,
            model,
            cache,
            mode,
            provider_calls: AtomicUsize::new(0),
            retry_base: Duration::from_millis(500),
        })
    }

    /// Shortens the pause between retries (tests).
    pub fn with_retry_base(mut self, base: Duration) -> Self {
        self.retry_base = base;
        self
    }

    pub fn model(&self) -> &ModelConfig {
        &self.model
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    /// Requests that reached the provider (cache hits excluded).
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    fn call_provider(&self, request: &ChatRequest<'_>) -> Result<String, GatewayError> {
        let mut attempt = 0;
        loop {
            self.provider_calls.fetch_add(1, Ordering::SeqCst);
            match self.provider.complete(request) {
                Err(e) if e.is_retriable() && attempt < self.model.max_retries => {
                    let pause = self.retry_base * 2u32.saturating_pow(attempt.min(6));
                    log::warn!("provider call failed ({e}); retry {} in {pause:?}", attempt + 1);
                    thread::sleep(pause);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    pub fn cached_call(&self, request: &ChatRequest<'_>) -> Result<String, GatewayError> {
        match self.mode {
            CacheMode::Live => self.call_provider(request),
            CacheMode::Replay => {
                let key = request.cache_key();
                let cache = self.cache.as_ref().expect("checked in new");
                match cache.get(&key)? {
                    Some(entry) => Ok(entry.response),
                    None => Err(GatewayError::ReplayMiss(key)),
                }
            }
            CacheMode::Record => {
                let response = self.call_provider(request)?;
                let entry = CacheEntry {
                    key: request.cache_key(),
                    model: request.model.to_string(),
                    temperature: request.temperature,
                    messages: request.messages.clone(),
                    response: response.clone(),
                    recorded_at: SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map(|d| d.as_secs_f64())
                        .unwrap_or(0.0),
                };
                self.cache.as_ref().expect("checked in new").put(&entry)?;
                Ok(response)
            }
        }
    }

    /// The first-stage clone question. Unparseable answers become
    /// non-clone with `defaulted` confidence rather than errors.
    pub fn classify_clone(&self, pair: &CodePair) -> Result<ScreenVerdict, GatewayError> {
        if pair.fragment_a.trim().is_empty() || pair.fragment_b.trim().is_empty() {
            return Err(GatewayError::InvalidRequest(format!("pair {} has an empty fragment", pair.id)));
        }
        let request = ChatRequest {
            model: &self.model.model_name,
            temperature: self.model.temperature,
            messages: screen_messages(pair),
            purpose: Purpose::Screen { pair },
        };
        Ok(parse_screen_response(&self.cached_call(&request)?))
    }

    /// Up to `count` candidate argument tuples for `entry`. `avoid` holds
    /// tuples generated earlier; the prompt asks the model not to repeat
    /// them. Candidates are not validated here.
    pub fn generate_inputs(
        &self,
        fragment: &str,
        entry: &EntrypointInfo,
        count: usize,
        avoid: &[Vec<Value>],
        origin: Origin,
        round: u32,
    ) -> Result<Vec<TestInput>, GatewayError> {
        if count == 0 {
            return Err(GatewayError::InvalidRequest("count must be at least 1".into()));
        }
        let request = ChatRequest {
            model: &self.model.model_name,
            temperature: self.model.generation_temperature,
            messages: gen_inputs_messages(fragment, &entry.name, entry.arity, count, avoid),
            purpose: Purpose::GenerateInputs {
                fragment,
                arity: entry.arity,
                count,
                already_seen: avoid.len(),
            },
        };
        let text = self.cached_call(&request)?;
        let mut args = parse_generated_inputs(&text, entry.arity);
        if args.is_empty() {
            return Err(GatewayError::GenerationEmpty);
        }
        args.truncate(count);
        Ok(args
            .into_iter()
            .map(|a| TestInput::new(a, origin, round))
            .collect())
    }

    pub fn reevaluate(
        &self,
        pair: &CodePair,
        prior: &ScreenVerdict,
        condition: ChallengeCondition,
    ) -> Result<ScreenVerdict, GatewayError> {
        let request = ChatRequest {
            model: &self.model.model_name,
            temperature: self.model.temperature,
            messages: reevaluate_messages(pair, prior, condition),
            purpose: Purpose::Reevaluate {
                pair,
                prior,
                condition,
            },
        };
        Ok(parse_screen_response(&self.cached_call(&request)?))
    }
}

/// Feeds the valid-input loop from the model. A round in which the model
/// returns nothing usable yields no candidates instead of failing, so a
/// fragment the model cannot serve ends up undecidable.
pub struct GatewaySource<'a> {
    pub gateway: &'a Gateway,
    pub fragment: &'a str,
    pub entry: &'a EntrypointInfo,
    pub origin: Origin,
}

impl CandidateSource for GatewaySource<'_> {
    type Error = GatewayError;

    fn candidates(
        &mut self,
        round: u32,
        want: usize,
        seen: &[Vec<Value>],
    ) -> Result<Vec<Vec<Value>>, GatewayError> {
        match self
            .gateway
            .generate_inputs(self.fragment, self.entry, want, seen, self.origin, round)
        {
            Ok(inputs) => Ok(inputs.into_iter().map(|t| t.args).collect()),
            Err(GatewayError::GenerationEmpty) => {
                log::debug!("round {round}: no parseable inputs");
                Ok(Vec::new())
            }
            Err(e) => Err(e),
        }
    }
}
