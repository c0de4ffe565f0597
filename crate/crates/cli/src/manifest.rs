use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_NAME: &str = "run_manifest.json";

/// Record of one CLI invocation. Everything except `timestamp` is a pure
/// function of the command line and seed.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Value,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub tool_version: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timestamp: String,
}

/// Output directory plus the artifacts written so far.
#[derive(Debug)]
pub struct Run {
    out_dir: PathBuf,
    command: String,
    seed: u64,
    config: Value,
    artifacts: Vec<String>,
}

impl Run {
    pub fn new(out_dir: PathBuf, command: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self { out_dir, command: command.to_string(), seed, config: Value::Null, artifacts: Vec::new() })
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    /// Path for an artifact inside the output directory, recorded in the manifest.
    pub fn artifact(&mut self, name: impl AsRef<Path>) -> PathBuf {
        let path = self.out_dir.join(name);
        let shown = path.display().to_string();
        if !self.artifacts.contains(&shown) {
            self.artifacts.push(shown);
        }
        path
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.artifact(name);
        qsf_core::io::save_json(&path, value)?;
        Ok(path)
    }

    pub fn write_with<F>(&mut self, name: &str, write: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> qsf_core::Result<()>,
    {
        let path = self.artifact(name);
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write(&mut out)?;
        out.flush()?;
        Ok(path)
    }

    pub fn finish(self, error: Option<&anyhow::Error>) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            args: std::env::args().skip(1).collect(),
            config: self.config,
            seed: self.seed,
            artifacts: self.artifacts,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            status: if error.is_some() { "failed" } else { "ok" }.to_string(),
            error: error.map(|e| format!("{e:#}")),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        qsf_core::io::save_json(&self.out_dir.join(MANIFEST_NAME), &manifest)?;
        Ok(())
    }
}
