//! Staged output files, atomic commit and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub version: String,
    pub inputs: BTreeMap<String, InputRecord>,
    pub params: serde_json::Value,
    /// Output file -> sha256.
    pub outputs: BTreeMap<String, String>,
}

/// `manifest.json`: one entry per subcommand that wrote into the directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Option<Manifest> {
        let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Output files held in memory until [`Staged::commit`].
pub struct Staged {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
    inputs: BTreeMap<String, InputRecord>,
}

impl Staged {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Staged { dir: dir.into(), files: BTreeMap::new(), inputs: BTreeMap::new() }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.insert(role.to_string(), InputRecord { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn write(&mut self, name: impl Into<String>, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(CliError::data)?;
        self.files.insert(name.into(), buf);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")
        })
    }

    pub fn bytes(&mut self, name: impl Into<String>, data: Vec<u8>) {
        self.files.insert(name.into(), data);
    }

    /// Writes every staged file (then the merged manifest) via a temporary
    /// sibling and a rename.
    pub fn commit(self, subcommand: &str, params: serde_json::Value) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut outputs = BTreeMap::new();
        for (name, data) in &self.files {
            outputs.insert(name.clone(), sha256_hex(data));
            write_atomic(&self.dir.join(name), data)?;
        }
        let mut manifest = Manifest::load(&self.dir).unwrap_or_default();
        manifest.runs.insert(
            subcommand.to_string(),
            ManifestEntry { version: env!("CARGO_PKG_VERSION").to_string(), inputs: self.inputs, params, outputs },
        );
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(CliError::data)?;
        text.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST), &text)
    }
}

pub fn write_atomic(path: &Path, data: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = File::create(&tmp).and_then(|mut f| {
        f.write_all(data)?;
        f.sync_all()
    });
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
