use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ingest::store::file_sha256;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFingerprint {
    pub path: String,
    pub size: u64,
    pub sha256: String,
}

impl InputFingerprint {
    pub fn of(path: &Path) -> Result<Self> {
        let size = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
        Ok(Self {
            path: path.display().to_string(),
            size,
            sha256: file_sha256(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub item: String,
    pub error: String,
}

/// Record of one artifact-producing command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Effective configuration after flag / file / default resolution.
    pub config: BTreeMap<String, Value>,
    pub inputs: Vec<InputFingerprint>,
    pub seed: Option<u64>,
    pub started_at_unix_ms: u64,
    pub finished_at_unix_ms: u64,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub failures: Vec<Failure>,
}

pub(crate) fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, Value>, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            inputs: Vec::new(),
            seed,
            started_at_unix_ms: now_unix_ms(),
            finished_at_unix_ms: 0,
            outputs: Vec::new(),
            warnings: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputFingerprint::of(path)?);
        Ok(())
    }

    /// Stamps the finish time and writes the manifest into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished_at_unix_ms = now_unix_ms();
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
