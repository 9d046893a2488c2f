//! Record/replay of chat calls.
//!
//! The log is JSONL of `{request, responses, timestamp}`. Replaying looks
//! requests up by their canonical JSON; repeated identical requests are
//! answered in recorded order, and the last entry is reused once exhausted.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatClient, ChatRequest, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub request: ChatRequest,
    pub responses: Vec<String>,
    pub timestamp: String,
}

fn key(request: &ChatRequest) -> String {
    serde_json::to_string(request).expect("requests always serialize")
}

pub struct RecordingClient {
    inner: Arc<dyn ChatClient>,
    sink: Mutex<std::io::BufWriter<std::fs::File>>,
}

impl RecordingClient {
    pub fn create(inner: Arc<dyn ChatClient>, path: &Path) -> Result<Self, GatewayError> {
        let sink = crate::io::buffered(path)
            .map_err(|e| GatewayError::Config(format!("opening replay log {}: {e}", path.display())))?;
        Ok(RecordingClient { inner, sink: Mutex::new(sink) })
    }
}

impl ChatClient for RecordingClient {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        let responses = self.inner.complete(request)?;
        let entry = ReplayEntry {
            request: request.clone(),
            responses: responses.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let mut sink = self.sink.lock().unwrap();
        let line = serde_json::to_string(&entry).map_err(|e| GatewayError::Malformed(e.to_string()))?;
        writeln!(sink, "{line}").and_then(|_| sink.flush()).map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(responses)
    }
}

/// Pending responses for one request, and the last one for repeats.
type Slot = (VecDeque<Vec<String>>, Vec<String>);

pub struct ReplayClient {
    entries: Mutex<HashMap<String, Slot>>,
}

impl ReplayClient {
    pub fn new(log: impl IntoIterator<Item = ReplayEntry>) -> Self {
        let mut entries: HashMap<String, Slot> = HashMap::new();
        for e in log {
            let slot = entries.entry(key(&e.request)).or_default();
            slot.1 = e.responses.clone();
            slot.0.push_back(e.responses);
        }
        ReplayClient { entries: Mutex::new(entries) }
    }

    pub fn from_path(path: &Path) -> Result<Self, GatewayError> {
        let log: Vec<ReplayEntry> = crate::io::read_jsonl(path)
            .map_err(|e| GatewayError::Config(format!("reading replay log {}: {e}", path.display())))?;
        Ok(Self::new(log))
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        let k = key(request);
        let mut entries = self.entries.lock().unwrap();
        let (queue, last) = entries
            .get_mut(&k)
            .ok_or_else(|| GatewayError::ReplayMiss(crate::text::truncate_chars(&k, 200).to_string()))?;
        Ok(queue.pop_front().unwrap_or_else(|| last.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::stub::{Matcher, StubClient, StubScript};
    use crate::gateway::ChatMessage;

    #[test]
    fn recorded_log_replays_identically() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.jsonl");
        let stub = StubClient::new(StubScript::new("No").rule(Matcher::Contains("wifi".into()), "Yes")).unwrap();
        let rec = RecordingClient::create(Arc::new(stub), &log).unwrap();
        let reqs: Vec<ChatRequest> = ["wifi please", "cake"]
            .iter()
            .map(|t| ChatRequest {
                model_tag: "m".into(),
                messages: vec![ChatMessage::user(*t)],
                temperature: 0.0,
                max_tokens: 4,
                n: 2,
            })
            .collect();
        let live: Vec<_> = reqs.iter().map(|r| rec.complete(r).unwrap()).collect();
        drop(rec);
        let replay = ReplayClient::from_path(&log).unwrap();
        let again: Vec<_> = reqs.iter().map(|r| replay.complete(r).unwrap()).collect();
        assert_eq!(live, again);
        let mut other = reqs[0].clone();
        other.temperature = 1.0;
        assert!(matches!(replay.complete(&other), Err(GatewayError::ReplayMiss(_))));
    }
}
