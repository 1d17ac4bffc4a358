//! Content-hashed manifests written next to every output.

use std::fs;
use std::path::{Path, PathBuf};

use darwinnet::harness::SCHEMA_VERSION;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub role: &'static str,
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: C,
    pub files: Vec<FileEntry>,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &'static str, seed: Option<u64>, config: C) -> Self {
        Self {
            tool: "darwinnet",
            tool_version: TOOL_VERSION,
            schema_version: SCHEMA_VERSION,
            command,
            seed,
            config,
            files: Vec::new(),
        }
    }

    /// Writes `bytes` to `dir/name` and records its hash.
    pub fn emit(
        &mut self,
        dir: &Path,
        role: &'static str,
        name: &str,
        bytes: &[u8],
    ) -> Result<PathBuf, CliError> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry {
            role,
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
