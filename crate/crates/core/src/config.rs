//! Run configuration (TOML). Unknown keys are rejected and every default is
//! spelled out here.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Mode;
use crate::corpus::{DedupConfig, IngestMode, TrainParams};
use crate::gateway::{GatewayConfig, GatewayKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("`{key}` {constraint}")]
    Invalid { key: String, constraint: String },
}

fn invalid(key: &str, constraint: &str) -> ConfigError {
    ConfigError::Invalid { key: key.into(), constraint: constraint.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySections {
    #[serde(default)]
    pub backbone: GatewayConfig,
    #[serde(default)]
    pub guidance_model: GatewayConfig,
    #[serde(default)]
    pub teacher: GatewayConfig,
    #[serde(default)]
    pub labeler: GatewayConfig,
    #[serde(default = "GatewayConfig::hashing")]
    pub embedder: GatewayConfig,
}

impl Default for GatewaySections {
    fn default() -> Self {
        GatewaySections {
            backbone: GatewayConfig::default(),
            guidance_model: GatewayConfig::default(),
            teacher: GatewayConfig::default(),
            labeler: GatewayConfig::default(),
            embedder: GatewayConfig::hashing(),
        }
    }
}

impl GatewaySections {
    pub fn get(&self, name: &str) -> Option<&GatewayConfig> {
        match name {
            "backbone" => Some(&self.backbone),
            "guidance_model" => Some(&self.guidance_model),
            "teacher" => Some(&self.teacher),
            "labeler" => Some(&self.labeler),
            "embedder" => Some(&self.embedder),
            _ => None,
        }
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut GatewayConfig> {
        match name {
            "backbone" => Some(&mut self.backbone),
            "guidance_model" => Some(&mut self.guidance_model),
            "teacher" => Some(&mut self.teacher),
            "labeler" => Some(&mut self.labeler),
            "embedder" => Some(&mut self.embedder),
            _ => None,
        }
    }
}

fn default_k() -> usize {
    3
}
fn default_m() -> u32 {
    4
}
fn default_temperature() -> f64 {
    1.0
}
fn default_max_steps() -> usize {
    15
}
fn default_max_chars() -> usize {
    8000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_path: Option<PathBuf>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { k: default_k(), index_path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsfConfig {
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

impl Default for RsfConfig {
    fn default() -> Self {
        RsfConfig { m: default_m(), temperature: default_temperature() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_max_chars")]
    pub max_tutorial_chars: usize,
    #[serde(default)]
    pub mode: Mode,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { max_steps: default_max_steps(), max_tutorial_chars: default_max_chars(), mode: Mode::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IngestModeConfig {
    Strict,
    #[default]
    SkipAndLog,
}

impl From<IngestModeConfig> for IngestMode {
    fn from(m: IngestModeConfig) -> Self {
        match m {
            IngestModeConfig::Strict => IngestMode::Strict,
            IngestModeConfig::SkipAndLog => IngestMode::SkipAndLog,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub ingest_mode: IngestModeConfig,
    pub bucket_count: usize,
    pub ngram_order: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub label_threshold: f64,
    pub num_perm: usize,
    pub shingle_size: usize,
    pub jaccard_threshold: f64,
    pub label_retries: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        let t = TrainParams::default();
        let d = DedupConfig::default();
        CorpusConfig {
            ingest_mode: IngestModeConfig::default(),
            bucket_count: t.bucket_count,
            ngram_order: t.ngram_order,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            label_threshold: t.label_threshold,
            num_perm: d.num_perm,
            shingle_size: d.shingle_size,
            jaccard_threshold: d.jaccard_threshold,
            label_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Curated corpus used by retrieval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gateway: GatewaySections,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub rsf: RsfConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    /// Directory relative paths resolve against; the config file's directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: PathBuf::from("<config>"), message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.retrieval.k < 1 {
            return Err(invalid("retrieval.k", "must be at least 1"));
        }
        if self.rsf.m < 1 {
            return Err(invalid("rsf.m", "must be at least 1"));
        }
        if !(self.rsf.temperature >= 0.0 && self.rsf.temperature.is_finite()) {
            return Err(invalid("rsf.temperature", "must be a finite number >= 0"));
        }
        if self.agent.max_steps < 1 {
            return Err(invalid("agent.max_steps", "must be at least 1"));
        }
        if self.agent.max_tutorial_chars < 1 {
            return Err(invalid("agent.max_tutorial_chars", "must be at least 1"));
        }
        for name in ["backbone", "guidance_model", "teacher", "labeler"] {
            let g = self.gateway.get(name).unwrap();
            if g.kind == GatewayKind::Hashing {
                return Err(invalid(&format!("gateway.{name}.kind"), "`hashing` is only valid for gateway.embedder"));
            }
            if g.max_in_flight < 1 {
                return Err(invalid(&format!("gateway.{name}.max_in_flight"), "must be at least 1"));
            }
        }
        if self.gateway.embedder.kind == GatewayKind::Stub {
            return Err(invalid("gateway.embedder.kind", "must be `hashing` or `remote`"));
        }
        let c = &self.corpus;
        if !(0.0..=1.0).contains(&c.jaccard_threshold) {
            return Err(invalid("corpus.jaccard_threshold", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&c.label_threshold) {
            return Err(invalid("corpus.label_threshold", "must be in [0, 1]"));
        }
        if c.num_perm < 1 || c.shingle_size < 1 {
            return Err(invalid("corpus.num_perm/shingle_size", "must be at least 1"));
        }
        self.train_params().validate().map_err(|e| invalid("corpus", &e.to_string()))?;
        Ok(())
    }

    pub fn train_params(&self) -> TrainParams {
        let c = &self.corpus;
        TrainParams {
            bucket_count: c.bucket_count,
            ngram_order: c.ngram_order,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            seed: self.seed,
            label_threshold: c.label_threshold,
        }
    }

    pub fn dedup(&self) -> DedupConfig {
        let c = &self.corpus;
        DedupConfig {
            num_perm: c.num_perm,
            shingle_size: c.shingle_size,
            jaccard_threshold: c.jaccard_threshold,
            seed: self.seed,
        }
    }

    /// Resolves a configured path against the config file's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    let mut cfg: RunConfig = toml::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: path.into(), message: e.message().trim().to_string() })?;
    cfg.validate()?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}
