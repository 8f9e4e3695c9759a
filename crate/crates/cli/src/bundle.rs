//! Output files are staged in memory and committed together; a failed stage
//! leaves the output directory untouched.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::sha256_hex;
use crate::error::{CliError, Result};
use crate::io::json_bytes;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Default)]
pub struct Bundle {
    files: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    seed: u64,
    config_sha256: &'a str,
    files: Vec<FileEntry>,
}

/// Run identity recorded in the manifest.
#[derive(Debug, Clone)]
pub struct RunInfo {
    pub seed: u64,
    pub config_sha256: String,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(path.into(), bytes);
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(Vec::as_slice)
    }

    pub fn merge(&mut self, other: Bundle) {
        self.files.extend(other.files);
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Write every file into `dir` (each through a temporary name and a
    /// rename), then rewrite the manifest over all files present in `dir`.
    pub fn commit(&self, dir: &Path, info: &RunInfo) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (rel, bytes) in &self.files {
                let target = dir.join(rel);
                if let Some(parent) = target.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
                }
                let tmp = target.with_extension("partial");
                std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
                std::fs::rename(&tmp, &target).map_err(|e| CliError::io(&target, e))?;
                written.push(target);
            }
            write_manifest(dir, info)
        })();
        if result.is_err() {
            for p in written {
                let _ = std::fs::remove_file(p);
            }
        }
        result
    }
}

fn collect(dir: &Path, base: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect(&path, base, out)?;
        } else {
            let rel = path.strip_prefix(base).expect("inside base").to_string_lossy().replace('\\', "/");
            if rel != MANIFEST && !rel.ends_with(".partial") {
                out.push((rel, path));
            }
        }
    }
    Ok(())
}

pub fn write_manifest(dir: &Path, info: &RunInfo) -> Result<()> {
    let mut files = Vec::new();
    collect(dir, dir, &mut files)?;
    files.sort();
    let mut entries = Vec::with_capacity(files.len());
    for (rel, path) in files {
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        entries.push(FileEntry { path: rel, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        core_version: panc_risk_core::VERSION,
        seed: info.seed,
        config_sha256: &info.config_sha256,
        files: entries,
    };
    let target = dir.join(MANIFEST);
    std::fs::write(&target, json_bytes(&manifest)).map_err(|e| CliError::io(&target, e))
}
