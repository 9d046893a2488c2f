//! Scripted chat client.
//!
//! A [`StubScript`] is an ordered list of rules over the request's user text;
//! the first matching rule supplies the response. Regex rules may reference
//! capture groups in their responses (`${1}`, `${name}`).

use std::path::Path;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize};

use super::{ChatClient, ChatRequest, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Contains(String),
    AllOf(Vec<String>),
    Regex(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubRule {
    pub matcher: Matcher,
    /// Response variants; sample `i` of a request gets variant `i % len`.
    #[serde(alias = "response", deserialize_with = "one_or_many")]
    pub responses: Vec<String>,
}

impl StubRule {
    pub fn new(matcher: Matcher, response: impl Into<String>) -> Self {
        StubRule { matcher, responses: vec![response.into()] }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubScript {
    #[serde(default)]
    pub rules: Vec<StubRule>,
    pub default_response: String,
    /// When false, variants are drawn at random from a seeded generator that
    /// advances across calls.
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default)]
    pub seed: u64,
}

impl StubScript {
    pub fn new(default_response: impl Into<String>) -> Self {
        StubScript { rules: Vec::new(), default_response: default_response.into(), deterministic: true, seed: 0 }
    }

    pub fn rule(mut self, matcher: Matcher, response: impl Into<String>) -> Self {
        self.rules.push(StubRule::new(matcher, response));
        self
    }

    pub fn from_path(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("reading stub script {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("parsing stub script {}: {e}", path.display())))
    }
}

enum Compiled {
    Contains(String),
    AllOf(Vec<String>),
    Regex(Regex),
}

pub struct StubClient {
    script: StubScript,
    compiled: Vec<Compiled>,
    rng: Mutex<ChaCha8Rng>,
}

impl StubClient {
    pub fn new(script: StubScript) -> Result<Self, GatewayError> {
        let compiled = script
            .rules
            .iter()
            .map(|r| {
                if r.responses.is_empty() {
                    return Err(GatewayError::Config("stub rule without responses".into()));
                }
                Ok(match &r.matcher {
                    Matcher::Contains(s) => Compiled::Contains(s.clone()),
                    Matcher::AllOf(v) => Compiled::AllOf(v.clone()),
                    Matcher::Regex(p) => Compiled::Regex(
                        Regex::new(p).map_err(|e| GatewayError::Config(format!("stub regex {p:?}: {e}")))?,
                    ),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rng = Mutex::new(ChaCha8Rng::seed_from_u64(script.seed));
        Ok(StubClient { script, compiled, rng })
    }

    /// Index of the first matching rule and the expanded response variants.
    fn respond(&self, text: &str) -> Option<(usize, Vec<String>)> {
        self.compiled.iter().enumerate().find_map(|(i, m)| {
            let variants = &self.script.rules[i].responses;
            match m {
                Compiled::Contains(s) => text.contains(s.as_str()).then(|| variants.clone()),
                Compiled::AllOf(v) => v.iter().all(|s| text.contains(s.as_str())).then(|| variants.clone()),
                Compiled::Regex(re) => re.captures(text).map(|caps| {
                    variants
                        .iter()
                        .map(|t| {
                            let mut out = String::new();
                            caps.expand(t, &mut out);
                            out
                        })
                        .collect()
                }),
            }
            .map(|v| (i, v))
        })
    }
}

impl ChatClient for StubClient {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        request.validate()?;
        let text = request.user_text();
        let variants = match self.respond(&text) {
            Some((_, v)) => v,
            None => vec![self.script.default_response.clone()],
        };
        let n = request.n as usize;
        if self.script.deterministic {
            Ok((0..n).map(|i| variants[i % variants.len()].clone()).collect())
        } else {
            let mut rng = self.rng.lock().unwrap();
            Ok((0..n).map(|_| variants[rng.gen_range(0..variants.len())].clone()).collect())
        }
    }
}
