use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Part {
    Text { text: String },
    /// Image URI or `data:` URL with inline base64.
    Image { uri: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(rename = "content")]
    pub parts: Vec<Part>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, parts: vec![Part::Text { text: text.into() }] }
    }

    pub fn user(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, parts: vec![Part::Text { text: text.into() }] }
    }

    pub fn with_image(mut self, uri: impl Into<String>) -> Self {
        self.parts.push(Part::Image { uri: uri.into() });
        self
    }

    /// Concatenation of the text parts, joined by newlines.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_tag: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub n: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidRequest(m.into()));
        if self.messages.is_empty() {
            return bad("messages must be non-empty");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be a finite value >= 0");
        }
        for m in &self.messages {
            if m.parts.is_empty() {
                return bad("message parts must be non-empty");
            }
            if m.role == Role::System && m.parts.iter().any(|p| matches!(p, Part::Image { .. })) {
                return bad("system messages are text-only");
            }
        }
        Ok(())
    }

    /// Text of all user messages, joined by newlines. Stub rules match against this.
    pub fn user_text(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(ChatMessage::text)
            .collect::<Vec<_>>()
            .join("\n")
    }
}
