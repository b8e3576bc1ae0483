//! Artifact staging and the run manifest.
//!
//! Everything is written into a hidden staging directory next to the output
//! directory and only moved into place once the whole command succeeded, so
//! a failed run leaves no partial artifacts behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub role: String,
    pub config_hash: String,
}

/// One plot panel. `series_column` splits the rows into curves, one per
/// distinct value, labelled by `series`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Panel {
    pub row: usize,
    pub col: usize,
    pub title: String,
    pub kind: &'static str,
    pub csv: String,
    pub x: String,
    pub y: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_column: Option<String>,
    pub series: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlay: Option<&'static str>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Layout {
    pub figure: String,
    pub rows: usize,
    pub cols: usize,
    pub panels: Vec<Panel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub scenario: String,
    pub config_hash: String,
    pub epsilons: Vec<f64>,
    pub files: Vec<FileEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<Layout>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub details: serde_json::Map<String, serde_json::Value>,
}

pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    hash: String,
    pub files: Vec<FileEntry>,
}

impl Staging {
    pub fn create(target: &Path, hash: &str) -> Result<Self, CliError> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
        let name = target.file_name().map_or("out".into(), |n| n.to_string_lossy().into_owned());
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, target: target.to_path_buf(), hash: hash.to_string(), files: Vec::new() })
    }

    /// Opens a new artifact for writing and records it in the manifest.
    pub fn file(&mut self, name: &str, role: &str) -> Result<BufWriter<File>, CliError> {
        if self.files.iter().any(|f| f.path == name) {
            return Err(CliError::Internal(format!("artifact `{name}` written twice")));
        }
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry { path: name.to_string(), role: role.to_string(), config_hash: self.hash.clone() });
        Ok(BufWriter::new(f))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, role: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.file(name, role)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Internal(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(&self.dir.join(name), e))?;
        w.flush().map_err(|e| CliError::io(&self.dir.join(name), e))
    }

    /// Writes the manifest and moves every artifact into the output directory.
    pub fn commit(mut self, mut manifest: Manifest) -> Result<PathBuf, CliError> {
        manifest.files = self.files.clone();
        let mut w = self.file("manifest.json", "manifest")?;
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(&self.dir, e))?;
        drop(w);
        if !self.target.exists() {
            fs::rename(&self.dir, &self.target).map_err(|e| CliError::io(&self.target, e))?;
        } else {
            for f in &self.files {
                let to = self.target.join(&f.path);
                fs::rename(self.dir.join(&f.path), &to).map_err(|e| CliError::io(&to, e))?;
            }
            fs::remove_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        }
        // Nothing left to clean up.
        self.dir = PathBuf::new();
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.dir.as_os_str().is_empty() {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
