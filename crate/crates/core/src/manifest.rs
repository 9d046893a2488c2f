//! Run manifests: what produced an artifact, from which inputs, with which
//! configuration. Written next to each output as `<output>.manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::io::write_json_pretty;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory when the file lies beneath it.
    pub path: String,
    /// Git blob id of the contents.
    pub git_sha1: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub counts: BTreeMap<String, serde_json::Value>,
    pub created_at: String,
}

/// `sha1("blob <len>\0" ++ bytes)`, as `git hash-object` computes it.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        return output.join("manifest.json");
    }
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

fn display_path(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// Digests regular files; directories contribute every file beneath them in
/// sorted order.
fn digest_all(paths: &[PathBuf], base: &Path) -> std::io::Result<Vec<FileDigest>> {
    let mut files = Vec::new();
    let mut stack: Vec<PathBuf> = paths.iter().rev().cloned().collect();
    while let Some(p) = stack.pop() {
        if p.is_dir() {
            let mut children: Vec<PathBuf> =
                std::fs::read_dir(&p)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            children.sort();
            stack.extend(children.into_iter().rev());
        } else {
            files.push(p);
        }
    }
    files
        .iter()
        .filter(|p| !p.to_string_lossy().ends_with(".manifest.json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .map(|p| {
            let bytes = std::fs::read(p)?;
            Ok(FileDigest { path: display_path(p, base), git_sha1: git_blob_sha1(&bytes), bytes: bytes.len() as u64 })
        })
        .collect()
}

pub struct ManifestBuilder {
    command: String,
    args: Vec<String>,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    counts: BTreeMap<String, serde_json::Value>,
}

impl ManifestBuilder {
    pub fn new(command: impl Into<String>, args: &[String], config: serde_json::Value) -> Self {
        ManifestBuilder {
            command: command.into(),
            args: args.to_vec(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            counts: BTreeMap::new(),
        }
    }

    pub fn input(mut self, p: impl Into<PathBuf>) -> Self {
        self.inputs.push(p.into());
        self
    }

    pub fn output(mut self, p: impl Into<PathBuf>) -> Self {
        self.outputs.push(p.into());
        self
    }

    pub fn count(mut self, name: &str, value: impl Serialize) -> Self {
        self.counts.insert(name.into(), serde_json::to_value(value).expect("count serializes"));
        self
    }

    pub fn build(&self, base: &Path) -> std::io::Result<Manifest> {
        Ok(Manifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            args: self.args.clone(),
            config: self.config.clone(),
            inputs: digest_all(&self.inputs, base)?,
            outputs: digest_all(&self.outputs, base)?,
            counts: self.counts.clone(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    /// Writes the manifest for the first output and returns its path.
    pub fn write(&self) -> std::io::Result<PathBuf> {
        let primary = self.outputs.first().ok_or_else(|| std::io::Error::other("manifest needs an output"))?;
        let path = manifest_path(primary);
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        write_json_pretty(&path, &self.build(&base)?)?;
        Ok(path)
    }
}
