//! Uniform access to chat-completion and embedding endpoints.
//!
//! Three backends sit behind [`ChatClient`]: [`remote::RemoteChatClient`]
//! speaks the common JSON chat-completions protocol, [`stub::StubClient`]
//! answers from a rule script, and [`replay::ReplayClient`] plays back a log
//! captured by [`replay::RecordingClient`]. [`limit::Limited`] caps the
//! number of outstanding requests for any of them.

pub mod limit;
pub mod message;
pub mod remote;
pub mod replay;
pub mod stub;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use message::{ChatMessage, ChatRequest, Part, Role};

use crate::retrieval::embed::{EmbeddingVector, HashingEmbedder, DEFAULT_DIMS};

pub const ENV_API_KEY: &str = "TUTORRAG_API_KEY";
pub const ENV_BASE_URL: &str = "TUTORRAG_BASE_URL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Timeout(_) | GatewayError::Transport(_) => true,
            GatewayError::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatClient: Send + Sync {
    /// Returns exactly `request.n` completions.
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError>;
}

pub trait EmbeddingClient: Send + Sync {
    /// One vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError>;

    /// Identifies the embedder and its version; stored in index headers.
    fn provider_tag(&self) -> String;
}

impl<T: ChatClient + ?Sized> ChatClient for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        (**self).complete(request)
    }
}

impl<T: EmbeddingClient + ?Sized> EmbeddingClient for Arc<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        (**self).embed(texts)
    }

    fn provider_tag(&self) -> String {
        (**self).provider_tag()
    }
}

/// Runs `op` up to `retries + 1` times, sleeping `base * 2^attempt` between
/// retryable failures.
pub fn with_retries<T>(
    retries: u32,
    base: Duration,
    mut op: impl FnMut() -> Result<T, GatewayError>,
) -> Result<T, GatewayError> {
    let mut attempt = 0;
    loop {
        match op() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt < retries => {
                log::warn!("gateway attempt {} failed: {e}; retrying", attempt + 1);
                std::thread::sleep(base * 2u32.saturating_pow(attempt));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// A chat client bound to one model tag.
#[derive(Clone)]
pub struct Gateway {
    client: Arc<dyn ChatClient>,
    pub model_tag: String,
    pub max_tokens: u32,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("model_tag", &self.model_tag).finish()
    }
}

impl Gateway {
    pub fn new(client: Arc<dyn ChatClient>, model_tag: impl Into<String>) -> Self {
        Gateway { client, model_tag: model_tag.into(), max_tokens: 1024 }
    }

    pub fn from_stub(script: stub::StubScript) -> Result<Self, GatewayError> {
        Ok(Gateway::new(Arc::new(stub::StubClient::new(script)?), "stub"))
    }

    pub fn complete(&self, messages: Vec<ChatMessage>, temperature: f64, n: u32) -> Result<Vec<String>, GatewayError> {
        let request = ChatRequest {
            model_tag: self.model_tag.clone(),
            messages,
            temperature,
            max_tokens: self.max_tokens,
            n,
        };
        request.validate()?;
        let out = self.client.complete(&request)?;
        if out.len() != n as usize {
            return Err(GatewayError::Malformed(format!("expected {n} completions, got {}", out.len())));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GatewayKind {
    Remote,
    #[default]
    Stub,
    Replay,
    /// Built-in hashed-unigram embedder; embedder sections only.
    Hashing,
}

fn default_model_tag() -> String {
    "default".into()
}
fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_timeout() -> u64 {
    60
}

/// One `[gateway.<name>]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default)]
    pub kind: GatewayKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default = "default_model_tag")]
    pub model_tag: String,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Stub rule script (JSON), for `kind = "stub"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    /// Replay log to answer from, for `kind = "replay"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    /// Capture every call to this replay log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<PathBuf>,
    /// Embedding dimensions for `kind = "hashing"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            kind: GatewayKind::Stub,
            base_url: None,
            model_tag: default_model_tag(),
            retries: default_retries(),
            max_in_flight: default_in_flight(),
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
            script: None,
            log: None,
            record: None,
            dims: None,
        }
    }
}

impl GatewayConfig {
    pub fn hashing() -> Self {
        GatewayConfig { kind: GatewayKind::Hashing, ..Default::default() }
    }

    fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Copy with relative script/log/record paths made relative to `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        let fix = |p: &Option<PathBuf>| p.as_deref().map(|p| Self::resolve(base, p));
        GatewayConfig { script: fix(&self.script), log: fix(&self.log), record: fix(&self.record), ..self.clone() }
    }

    fn remote_endpoint(&self) -> Result<(String, Option<String>), GatewayError> {
        let base_url = self
            .base_url
            .clone()
            .or_else(|| std::env::var(ENV_BASE_URL).ok())
            .ok_or_else(|| GatewayError::Config(format!("remote gateway needs base_url or {ENV_BASE_URL}")))?;
        Ok((base_url, std::env::var(ENV_API_KEY).ok()))
    }

    /// Builds a chat gateway; relative script/log paths resolve against `base_dir`.
    pub fn build_chat(&self, base_dir: &Path) -> Result<Gateway, GatewayError> {
        let client: Arc<dyn ChatClient> = match self.kind {
            GatewayKind::Remote => {
                let (url, key) = self.remote_endpoint()?;
                Arc::new(remote::RemoteChatClient::new(
                    url,
                    key,
                    self.retries,
                    Duration::from_secs(self.timeout_secs),
                )?)
            }
            GatewayKind::Stub => {
                let path = self
                    .script
                    .as_ref()
                    .ok_or_else(|| GatewayError::Config("stub gateway needs `script`".into()))?;
                let script = stub::StubScript::from_path(&Self::resolve(base_dir, path))?;
                Arc::new(stub::StubClient::new(script)?)
            }
            GatewayKind::Replay => {
                let path = self
                    .log
                    .as_ref()
                    .ok_or_else(|| GatewayError::Config("replay gateway needs `log`".into()))?;
                Arc::new(replay::ReplayClient::from_path(&Self::resolve(base_dir, path))?)
            }
            GatewayKind::Hashing => {
                return Err(GatewayError::Config("`hashing` is only valid for the embedder".into()))
            }
        };
        let client: Arc<dyn ChatClient> = match &self.record {
            Some(p) => Arc::new(replay::RecordingClient::create(client, &Self::resolve(base_dir, p))?),
            None => client,
        };
        let limited = Arc::new(limit::Limited::new(client, self.max_in_flight.max(1)));
        let mut gw = Gateway::new(limited, self.model_tag.clone());
        gw.max_tokens = self.max_tokens;
        Ok(gw)
    }

    pub fn build_embedder(&self) -> Result<Arc<dyn EmbeddingClient>, GatewayError> {
        match self.kind {
            GatewayKind::Hashing => Ok(Arc::new(HashingEmbedder::new(self.dims.unwrap_or(DEFAULT_DIMS)))),
            GatewayKind::Remote => {
                let (url, key) = self.remote_endpoint()?;
                let client = remote::RemoteEmbeddingClient::new(
                    url,
                    key,
                    self.model_tag.clone(),
                    self.retries,
                    Duration::from_secs(self.timeout_secs),
                )?;
                Ok(Arc::new(limit::Limited::new(client, self.max_in_flight.max(1))))
            }
            other => Err(GatewayError::Config(format!("embedder kind {other:?} is not supported"))),
        }
    }
}
