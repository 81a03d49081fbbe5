//! Run manifests written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::{files, json};

pub const MANIFEST_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

impl FileRecord {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: files::sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub format_version: u64,
    pub command: String,
    pub version: String,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    /// Seconds since the Unix epoch at completion.
    pub wall_clock: f64,
}

/// Collects a command's outputs and writes them with their manifest.
#[derive(Debug)]
pub struct Outputs {
    command: &'static str,
    config: Value,
    inputs: Vec<FileRecord>,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new(command: &'static str, config: Value) -> Self {
        Self {
            command,
            config,
            inputs: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = files::read(path)?;
        self.inputs.push(FileRecord::new(path, &bytes));
        Ok(())
    }

    pub fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes every output, then the manifest at `path`.
    pub fn commit(self, path: &Path) -> Result<()> {
        let mut records = Vec::with_capacity(self.files.len());
        for (p, bytes) in &self.files {
            files::write_atomic(p, bytes)?;
            records.push(FileRecord::new(p, bytes));
        }
        let wall_clock = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        let manifest = RunManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            command: self.command.into(),
            version: crate::VERSION.into(),
            config: self.config,
            inputs: self.inputs,
            outputs: records,
            wall_clock,
        };
        files::write_atomic(path, &json::to_bytes(&manifest))
    }
}

/// `<name>.manifest.json` next to `primary`, unless `explicit` is given.
pub fn manifest_path(explicit: Option<&Path>, primary: &Path) -> PathBuf {
    explicit.map_or_else(
        || {
            let mut name = primary.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            primary.with_file_name(name)
        },
        Path::to_path_buf,
    )
}
