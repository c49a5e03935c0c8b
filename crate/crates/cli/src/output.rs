//! Output directories and their manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use megtomo::bench::ScenarioConfig;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a ScenarioConfig,
    master_seed: u64,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    timestamp: u64,
    #[serde(skip_serializing_if = "Map::is_empty")]
    details: Map<String, Value>,
    files: Vec<FileEntry>,
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

/// Collects every file written under `root` so the manifest can list digests.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::File::create(&path)?.write_all(bytes)?;
        self.files.push((rel.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes `manifest.json` covering every file written so far.
    pub fn finish(mut self, command: &str, config: &ScenarioConfig, details: Map<String, Value>) -> std::io::Result<()> {
        self.files.sort();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            master_seed: config.master_seed,
            timestamp: timestamp(),
            details,
            files: self
                .files
                .iter()
                .map(|(path, sha256)| FileEntry { path: path.clone(), sha256: sha256.clone() })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)
    }
}
