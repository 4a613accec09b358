//! Run manifests: inputs, seeds and sha256 digests of every artifact.
//! No timestamps, so reruns produce identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    /// As given on the command line or in the config.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    /// Resolved configuration, if the command used one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub inputs: BTreeMap<String, InputRecord>,
    /// Output path relative to the output directory, then its digest.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, label: &str, given: &str, path: &Path) -> CliResult<()> {
        let record = InputRecord {
            path: given.to_string(),
            sha256: sha256_file(path)?,
        };
        self.inputs.insert(label.to_string(), record);
        Ok(())
    }

    /// Digest every output written so far under `out`.
    pub fn outputs_from(&mut self, out: &Path, files: &[PathBuf]) -> CliResult<()> {
        for f in files {
            let rel = f.strip_prefix(out).unwrap_or(f);
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            self.outputs.insert(key, sha256_file(f)?);
        }
        Ok(())
    }

    pub fn write(&self, out: &Path) -> CliResult<PathBuf> {
        let path = out.join("manifest.json");
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
