//! `manifest.json`, written next to every command's outputs.
//!
//! Holds what is needed to reproduce the run and nothing that varies
//! between identical runs: the output directory and worker count are left
//! out, and the timestamp comes from `SOURCE_DATE_EPOCH` or, failing that,
//! the newest input modification time.

use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use anyhow::Result;
use gk_core::GkError;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::io::read_bytes;

pub struct Manifest {
    subcommand: &'static str,
    config: Map<String, Value>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<(String, Vec<u8>)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(subcommand: &'static str) -> Manifest {
        Manifest {
            subcommand,
            config: Map::new(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.config.insert(key.to_string(), value.into());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.outputs.push((name.to_string(), contents.into()));
    }

    fn timestamp(&self) -> Option<u64> {
        if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
            if let Ok(t) = v.trim().parse() {
                return Some(t);
            }
        }
        self.inputs
            .iter()
            .filter_map(|p| std::fs::metadata(p).ok()?.modified().ok())
            .filter_map(|t| t.duration_since(UNIX_EPOCH).ok())
            .map(|d| d.as_secs())
            .max()
    }

    /// Write the outputs and the manifest into `dir`.
    pub fn write(self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| GkError::io(dir, e))?;
        let mut inputs = Vec::new();
        for p in &self.inputs {
            inputs.push(json!({
                "path": p.display().to_string(),
                "sha256": sha256_hex(&read_bytes(p)?),
            }));
        }
        let mut outputs = Vec::new();
        for (name, bytes) in &self.outputs {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| GkError::io(&path, e))?;
            outputs.push(json!({ "file": name, "sha256": sha256_hex(bytes) }));
        }
        let timestamp = self.timestamp();
        let doc = json!({
            "tool": "gk",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "config": Value::Object(self.config),
            "seed": self.seed,
            "inputs": inputs,
            "outputs": outputs,
            "timestamp": timestamp,
        });
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| GkError::io(&path, e))?;
        Ok(())
    }
}
