//! Pluggable completion backends with content-addressed caching.
//!
//! Three backends share one entry point, [`Gateway::complete`]:
//!
//! * `live` sends the prompt to an HTTP chat-completion endpoint, retrying
//!   transient failures with exponential backoff, and caches every answer;
//! * `replay` answers only from the cache and fails on a miss;
//! * `mock` synthesizes a schema-valid answer from a seeded hash of the prompt.

mod cache;
pub(crate) mod mock;
pub mod parse;
mod transport;

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, ResponseCache};
pub use mock::mock_response;
pub use parse::{
    parse_annotation_response, parse_eslmod_response, EslmodLabels, ParseError, ParseErrorKind, ParsedResponse,
    QualityScores, WhowLabels,
};
pub use transport::{HttpTransport, Transport, TransportError, API_BASE_ENV, API_KEY_ENV};

pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const JSON_ONLY_SUFFIX: &str = "\n\nRespond with valid JSON only.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaTag {
    Whow,
    Eslmod,
    Quality,
}

impl fmt::Display for SchemaTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaTag::Whow => "whow",
            SchemaTag::Eslmod => "eslmod",
            SchemaTag::Quality => "quality",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl Decoding {
    /// Fixed-key-order rendering used in the cache key.
    pub fn canonical(&self) -> String {
        format!(
            "{{\"max_tokens\":{},\"temperature\":{}}}",
            self.max_tokens,
            serde_json::to_string(&self.temperature).expect("finite temperature")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub prompt_text: String,
    pub decoding: Decoding,
    pub model_id: String,
    pub schema_tag: SchemaTag,
}

impl PromptRequest {
    pub fn new(prompt_text: impl Into<String>, model_id: impl Into<String>, schema_tag: SchemaTag) -> Self {
        PromptRequest {
            prompt_text: prompt_text.into(),
            decoding: Decoding::default(),
            model_id: model_id.into(),
            schema_tag,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt_text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        let t = self.decoding.temperature;
        if !(0.0..=2.0).contains(&t) {
            return Err(GatewayError::InvalidRequest(format!("temperature {t} outside [0, 2]")));
        }
        Ok(())
    }

    /// SHA-256 over length-prefixed (model_id, prompt_text, canonical decoding).
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            self.model_id.as_bytes(),
            self.prompt_text.as_bytes(),
            self.decoding.canonical().as_bytes(),
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        hex::encode(h.finalize())
    }

    fn json_only_retry(&self) -> PromptRequest {
        PromptRequest {
            prompt_text: format!("{}{}", self.prompt_text, JSON_ONLY_SUFFIX),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Mock,
    Replay,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Live => "live",
            BackendKind::Mock => "mock",
            BackendKind::Replay => "replay",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(BackendKind::Live),
            "mock" => Ok(BackendKind::Mock),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cache miss for key {0}")]
    CacheMiss(String),
    #[error("missing credentials: {0}")]
    Credentials(String),
    #[error("backend failed after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("cache i/o: {0}")]
    Cache(#[from] std::io::Error),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{0} backend requires a cache directory")]
    NoCache(BackendKind),
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Outcome of a completion that must parse into `T`.
#[derive(Debug, Clone)]
pub enum Completion<T> {
    Parsed {
        value: T,
        prompt_hash: String,
    },
    /// Both the original prompt and the JSON-only re-prompt failed to parse.
    Unparsed {
        error: ParseError,
        prompt_hash: String,
    },
}

pub struct Gateway {
    kind: BackendKind,
    cache: Option<ResponseCache>,
    transport: Option<Box<dyn Transport>>,
    seed: u64,
    retry: RetryPolicy,
    in_flight: usize,
    network_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("kind", &self.kind)
            .field("cache", &self.cache.as_ref().map(|c| c.root().to_path_buf()))
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    fn with(kind: BackendKind, cache: Option<PathBuf>, transport: Option<Box<dyn Transport>>, seed: u64) -> Self {
        Gateway {
            kind,
            cache: cache.map(ResponseCache::new),
            transport,
            seed,
            retry: RetryPolicy::default(),
            in_flight: 4,
            network_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    /// Network-free backend. When `cache_dir` is set, answers are also cached
    /// so a later replay run can reproduce them.
    pub fn mock(seed: u64, cache_dir: Option<PathBuf>) -> Self {
        Gateway::with(BackendKind::Mock, cache_dir, None, seed)
    }

    pub fn replay(cache_dir: impl Into<PathBuf>) -> Self {
        Gateway::with(BackendKind::Replay, Some(cache_dir.into()), None, 0)
    }

    pub fn live(cache_dir: impl Into<PathBuf>, transport: Box<dyn Transport>) -> Self {
        Gateway::with(BackendKind::Live, Some(cache_dir.into()), Some(transport), 0)
    }

    /// Live backend talking to `$MODLAB_API_BASE` with `$MODLAB_API_KEY`.
    pub fn live_from_env(cache_dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let transport = HttpTransport::from_env()?;
        Ok(Gateway::live(cache_dir, Box::new(transport)))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_in_flight(mut self, n: usize) -> Self {
        self.in_flight = n.max(1);
        self
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    /// Applies `f` to every item with at most `in_flight` calls running at once,
    /// preserving input order.
    pub fn map_bounded<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(self.in_flight).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(f).collect(),
        }
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let key = request.cache_key();
        match self.kind {
            BackendKind::Mock => {
                let raw = mock_response(request, self.seed);
                if let Some(cache) = &self.cache {
                    if cache.get(&key)?.is_none() {
                        cache.put(&self.entry(key, request, &raw))?;
                    }
                }
                Ok(raw)
            }
            BackendKind::Replay => {
                let cache = self.cache.as_ref().ok_or(GatewayError::NoCache(self.kind))?;
                match cache.get(&key)? {
                    Some(e) => {
                        self.cache_hits.fetch_add(1, Ordering::Relaxed);
                        Ok(e.raw_response)
                    }
                    None => Err(GatewayError::CacheMiss(key)),
                }
            }
            BackendKind::Live => {
                let cache = self.cache.as_ref().ok_or(GatewayError::NoCache(self.kind))?;
                if let Some(e) = cache.get(&key)? {
                    self.cache_hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(e.raw_response);
                }
                let transport = self
                    .transport
                    .as_ref()
                    .ok_or_else(|| GatewayError::Credentials("no transport configured".into()))?;
                let raw = self.send_with_retry(transport.as_ref(), request)?;
                cache.put(&self.entry(key, request, &raw))?;
                Ok(raw)
            }
        }
    }

    /// Completes and parses; a parse failure triggers one JSON-only re-prompt.
    pub fn complete_parsed<T>(
        &self,
        request: &PromptRequest,
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<Completion<T>, GatewayError> {
        let prompt_hash = request.cache_key();
        let raw = self.complete(request)?;
        match parse(&raw) {
            Ok(value) => Ok(Completion::Parsed { value, prompt_hash }),
            Err(first) => {
                log::debug!("re-prompting after parse failure: {first}");
                let retry = request.json_only_retry();
                let raw = match self.complete(&retry) {
                    Ok(raw) => raw,
                    // a replay of a run whose first answer already parsed has no retry entry
                    Err(GatewayError::CacheMiss(_)) => {
                        return Ok(Completion::Unparsed {
                            error: first,
                            prompt_hash,
                        })
                    }
                    Err(e) => return Err(e),
                };
                Ok(match parse(&raw) {
                    Ok(value) => Completion::Parsed { value, prompt_hash },
                    Err(error) => Completion::Unparsed { error, prompt_hash },
                })
            }
        }
    }

    fn entry(&self, key: String, request: &PromptRequest, raw: &str) -> CacheEntry {
        CacheEntry {
            key,
            request: request.clone(),
            raw_response: raw.to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    fn send_with_retry(&self, transport: &dyn Transport, request: &PromptRequest) -> Result<String, GatewayError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            self.network_calls.fetch_add(1, Ordering::Relaxed);
            match transport.send(request) {
                Ok(raw) => return Ok(raw),
                Err(e) if e.transient && attempt <= self.retry.max_retries => {
                    let delay = self.retry.base_delay * 2u32.saturating_pow(attempt - 1);
                    log::warn!(
                        "transient backend failure (attempt {attempt}): {}; retrying in {delay:?}",
                        e.message
                    );
                    thread::sleep(delay);
                }
                Err(e) => {
                    return Err(GatewayError::Network {
                        attempts: attempt,
                        message: e.message,
                    })
                }
            }
        }
    }
}
