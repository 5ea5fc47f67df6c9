//! Run manifest: enough to reproduce every output file.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read(path)?;
        Ok(Self {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub program: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Extra command-line parameters that affect the outputs.
    pub arguments: Vec<String>,
    pub seed: u64,
    pub rng: &'static str,
    /// Worker count; outputs do not depend on it.
    pub threads: Option<usize>,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    /// Verbatim configuration text.
    pub config: Option<String>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, threads: Option<usize>) -> Self {
        Self {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            arguments: Vec::new(),
            seed,
            rng: multicoag_core::ssa::RNG_NAME,
            threads,
            config_path: None,
            config_sha256: None,
            config: None,
            files: Vec::new(),
        }
    }

    pub fn with_config(mut self, path: &Path, text: &str) -> Self {
        self.config_path = Some(path.display().to_string());
        self.config_sha256 = Some(sha256_hex(text.as_bytes()));
        self.config = Some(text.to_string());
        self
    }

    pub fn add_files(&mut self, paths: &[PathBuf]) -> Result<(), CliError> {
        for p in paths {
            self.files.push(FileEntry::of(p)?);
        }
        Ok(())
    }
}
