use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lyrics_eval::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything needed to rerun a subcommand and get the same bytes back.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    /// Input path -> sha256 of its contents (directories hash their sorted entries).
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &impl Serialize, inputs: &[&Path]) -> Result<Self> {
        let mut digests = BTreeMap::new();
        for path in inputs {
            digests.insert(path.display().to_string(), digest_path(path)?);
        }
        Ok(Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("config is serializable"),
            inputs: digests,
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn digest_path(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| io_error(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for entry in entries {
            hasher.update(
                entry
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .as_bytes(),
            );
            hasher.update([0]);
            hasher.update(Sha256::digest(read(&entry)?));
        }
    } else {
        hasher.update(read(path)?);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn to_pretty_json(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output is serializable");
    text.push('\n');
    text
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Writes `contents` to `out` and the manifest next to it.
pub fn emit(out: &Path, contents: &str, manifest: &RunManifest) -> Result<()> {
    write_file(out, contents)?;
    write_file(&manifest_path(out), &to_pretty_json(manifest))
}
