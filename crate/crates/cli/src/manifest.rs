//! Output manifests: every artifact a command wrote, with size and digest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

#[derive(serde::Serialize)]
struct Entry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(serde::Serialize)]
struct Manifest {
    files: Vec<Entry>,
}

/// Writes `<out_dir>/manifest.json` listing `files` (paths relative to the
/// out dir where possible), sorted by path. Returns the manifest path.
pub fn write_manifest(out_dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(files.len());
    for file in files {
        let bytes = fs::read(file).with_context(|| format!("hashing {}", file.display()))?;
        let digest = Sha256::digest(&bytes);
        let rel = file.strip_prefix(out_dir).unwrap_or(file);
        entries.push(Entry {
            path: rel.to_string_lossy().into_owned(),
            bytes: bytes.len() as u64,
            sha256: format!("{digest:x}"),
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));

    let path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&Manifest { files: entries })?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
