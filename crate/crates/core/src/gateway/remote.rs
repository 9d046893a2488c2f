//! HTTP clients for JSON chat-completion and embedding endpoints.
//!
//! Chat: `POST {base}/chat/completions` with `model, messages, temperature,
//! max_tokens, n`; completions are read from `choices[i].message.content`.
//! Embeddings: `POST {base}/embeddings` with `model, input`; vectors are read
//! from `data[i].embedding`, ordered by `data[i].index`.

use std::time::Duration;

use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::{with_retries, ChatClient, ChatMessage, ChatRequest, EmbeddingClient, GatewayError, Part};
use crate::retrieval::embed::EmbeddingVector;

const BACKOFF_BASE: Duration = Duration::from_millis(250);

struct Http {
    base_url: String,
    api_key: Option<String>,
    retries: u32,
    client: Client,
}

impl Http {
    fn new(base_url: String, api_key: Option<String>, retries: u32, timeout: Duration) -> Result<Self, GatewayError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Http { base_url: base_url.trim_end_matches('/').to_string(), api_key, retries, client })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let url = format!("{}/{}", self.base_url, path);
        with_retries(self.retries, BACKOFF_BASE, || {
            let mut req = self.client.post(&url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(classify)?;
            let status = resp.status().as_u16();
            let text = resp.text().map_err(classify)?;
            match status {
                200..=299 => serde_json::from_str(&text).map_err(|e| malformed(&e.to_string(), &text)),
                401 | 403 => Err(GatewayError::Auth(excerpt(&text))),
                _ => Err(GatewayError::Status { status, body: excerpt(&text) }),
            }
        })
    }
}

fn classify(e: reqwest::Error) -> GatewayError {
    if e.is_timeout() {
        GatewayError::Timeout(e.to_string())
    } else {
        GatewayError::Transport(e.to_string())
    }
}

fn excerpt(text: &str) -> String {
    crate::text::truncate_chars(text, 200).to_string()
}

fn malformed(what: &str, payload: &str) -> GatewayError {
    GatewayError::Malformed(format!("{what}; payload: {}", excerpt(payload)))
}

fn wire_message(m: &ChatMessage) -> Value {
    let content = match m.parts.as_slice() {
        [Part::Text { text }] => Value::String(text.clone()),
        parts => Value::Array(
            parts
                .iter()
                .map(|p| match p {
                    Part::Text { text } => json!({"type": "text", "text": text}),
                    Part::Image { uri } => json!({"type": "image_url", "image_url": {"url": uri}}),
                })
                .collect(),
        ),
    };
    json!({"role": m.role, "content": content})
}

/// Request body in the de-facto chat-completions format.
pub fn chat_body(request: &ChatRequest, n: u32) -> Value {
    json!({
        "model": request.model_tag,
        "messages": request.messages.iter().map(wire_message).collect::<Vec<_>>(),
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "n": n,
    })
}

pub fn parse_chat_response(body: &Value) -> Result<Vec<String>, GatewayError> {
    let choices = body
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing choices", &body.to_string()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| malformed("choice without message.content", &body.to_string()))
        })
        .collect()
}

pub struct RemoteChatClient {
    http: Http,
}

impl RemoteChatClient {
    pub fn new(base_url: String, api_key: Option<String>, retries: u32, timeout: Duration) -> Result<Self, GatewayError> {
        Ok(RemoteChatClient { http: Http::new(base_url, api_key, retries, timeout)? })
    }
}

impl ChatClient for RemoteChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        request.validate()?;
        let mut out = Vec::with_capacity(request.n as usize);
        // Some servers ignore `n`; ask again for the remainder.
        while out.len() < request.n as usize {
            let missing = request.n - out.len() as u32;
            let got = parse_chat_response(&self.http.post("chat/completions", &chat_body(request, missing))?)?;
            if got.is_empty() {
                return Err(GatewayError::Malformed("empty choices".into()));
            }
            out.extend(got.into_iter().take(missing as usize));
        }
        Ok(out)
    }
}

pub struct RemoteEmbeddingClient {
    http: Http,
    model: String,
}

impl RemoteEmbeddingClient {
    pub fn new(
        base_url: String,
        api_key: Option<String>,
        model: String,
        retries: u32,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        Ok(RemoteEmbeddingClient { http: Http::new(base_url, api_key, retries, timeout)?, model })
    }
}

pub fn parse_embedding_response(body: &Value, expected: usize) -> Result<Vec<EmbeddingVector>, GatewayError> {
    let data = body
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing data", &body.to_string()))?;
    let mut rows: Vec<(u64, EmbeddingVector)> = data
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let index = d.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
            let values = d
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("entry without embedding", &body.to_string()))?
                .iter()
                .map(|v| v.as_f64().map(|f| f as f32))
                .collect::<Option<Vec<f32>>>()
                .ok_or_else(|| malformed("non-numeric embedding value", &body.to_string()))?;
            let vector = EmbeddingVector::new(values).map_err(|e| GatewayError::Malformed(e.to_string()))?;
            Ok((index, vector))
        })
        .collect::<Result<_, GatewayError>>()?;
    if rows.len() != expected {
        return Err(GatewayError::Malformed(format!("expected {expected} embeddings, got {}", rows.len())));
    }
    rows.sort_by_key(|(i, _)| *i);
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

impl EmbeddingClient for RemoteEmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::InvalidRequest("no texts to embed".into()));
        }
        let body = json!({"model": self.model, "input": texts});
        parse_embedding_response(&self.http.post("embeddings", &body)?, texts.len())
    }

    fn provider_tag(&self) -> String {
        format!("remote:{}", self.model)
    }
}
