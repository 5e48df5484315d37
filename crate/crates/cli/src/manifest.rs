//! Append-only run manifest: one JSON object per artifact-producing command.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Manifest location unless `ACCRL_MANIFEST` names another file.
pub const DEFAULT_MANIFEST: &str = "accrl_manifest.jsonl";

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub seed: Option<String>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    /// Wall-clock milliseconds per phase.
    pub phases: BTreeMap<String, f64>,
}

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            phases: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(Artifact {
            path: path.display().to_string(),
            sha256: digest_hex(bytes),
        });
    }

    pub fn output(&mut self, path: &str, bytes: &[u8]) {
        self.outputs.push(Artifact {
            path: path.to_string(),
            sha256: digest_hex(bytes),
        });
    }

    /// Runs `f` and records its duration under `name`.
    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.phases
            .insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn append(&self) -> std::io::Result<()> {
        let path = std::env::var_os("ACCRL_MANIFEST")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_MANIFEST));
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let line = serde_json::to_string(self).expect("manifest serializes");
        writeln!(file, "{line}")
    }
}
