//! Output files named by configuration hash, with a manifest written last.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the subcommand, the resolved configuration and the contents of
/// every referenced input file.
pub fn config_hash(command: &str, config: &impl Serialize, inputs: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    h.update(serde_json::to_vec(config)?);
    for p in inputs {
        h.update(b"\n");
        h.update(fs::read(p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(hex(&h.finalize()))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    started_unix: f64,
    wall_clock_seconds: f64,
    config: serde_json::Value,
    outputs: &'a [OutputEntry],
}

pub struct Run {
    dir: PathBuf,
    command: String,
    hash: String,
    seed: u64,
    config: serde_json::Value,
    started: SystemTime,
    clock: Instant,
    outputs: Vec<OutputEntry>,
}

impl Run {
    pub fn new(dir: &Path, command: &str, config: &impl Serialize, seed: u64, inputs: &[PathBuf]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            hash: config_hash(command, config, inputs)?,
            seed,
            config: serde_json::to_value(config)?,
            started: SystemTime::now(),
            clock: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn short_hash(&self) -> &str {
        &self.hash[..12]
    }

    /// `<command>_<hash>[_<suffix>].<ext>`.
    pub fn file_name(&self, suffix: &str, ext: &str) -> String {
        let stem = self.command.replace('-', "_");
        if suffix.is_empty() {
            format!("{stem}_{}.{ext}", self.short_hash())
        } else {
            format!("{stem}_{}_{suffix}.{ext}", self.short_hash())
        }
    }

    pub fn write(&mut self, suffix: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        let name = self.file_name(suffix, ext);
        let path = self.dir.join(&name);
        write_atomic(&path, bytes)?;
        self.outputs.push(OutputEntry {
            file: name,
            sha256: hex(&Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json(&mut self, suffix: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(suffix, "json", text.as_bytes())
    }

    /// Writes the manifest; call after every output.
    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config_hash: &self.hash,
            seed: self.seed,
            started_unix: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
            config: self.config,
            outputs: &self.outputs,
        };
        let path = self.dir.join(format!("{}_{}_manifest.json", self.command.replace('-', "_"), &self.hash[..12]));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_command_and_config() {
        let a = config_hash("x", &serde_json::json!({"n": 1}), &[]).unwrap();
        let b = config_hash("y", &serde_json::json!({"n": 1}), &[]).unwrap();
        let c = config_hash("x", &serde_json::json!({"n": 2}), &[]).unwrap();
        assert_eq!(a.len(), 64);
        assert!(a != b && a != c);
        assert_eq!(a, config_hash("x", &serde_json::json!({"n": 1}), &[]).unwrap());
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"n\n1\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"n\n1\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
