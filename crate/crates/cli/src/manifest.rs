use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use wsmom::experiments::{canonical_hash, sha256_hex};
use wsmom::Result;

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
}

fn hash_file(path: &Path) -> Result<FileHash> {
    Ok(FileHash {
        path: path.display().to_string(),
        sha256: sha256_hex(&std::fs::read(path)?),
    })
}

/// Hashes files, descending one level into directories.
fn hash_all(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_file())
                .collect();
            entries.sort();
            for e in entries {
                out.push(hash_file(&e)?);
            }
        } else if p.is_file() {
            out.push(hash_file(p)?);
        }
    }
    Ok(out)
}

pub struct Recorder {
    subcommand: String,
    seed: u64,
    start: Instant,
    started_unix: f64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
}

impl Recorder {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            seed,
            start: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn finish(self, path: &Path) -> Result<()> {
        // the manifest must not hash itself
        let outputs: Vec<PathBuf> = self.outputs.into_iter().filter(|p| p != path).collect();
        let mut outs = hash_all(&outputs)?;
        outs.retain(|f| Path::new(&f.path) != path);
        let manifest = RunManifest {
            subcommand: self.subcommand,
            argv: std::env::args().collect(),
            config_hash: canonical_hash(&self.config)?,
            config: self.config,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: hash_all(&self.inputs)?,
            outputs: outs,
            started_unix: self.started_unix,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}
