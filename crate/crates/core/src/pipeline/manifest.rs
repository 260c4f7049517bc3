//! Content-hash manifests, the output-root lock and stage CPU timing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";
/// Files that carry timings; they are never hashed into manifests.
pub const TIMING_FILES: &[&str] = &["stage.json", "report.txt", "report.tsv"];

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(hash_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Hash of a sequence of strings, unambiguous in their boundaries.
pub fn hash_parts<S: AsRef<str>>(parts: &[S]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        let p = p.as_ref();
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn hashed_files(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != MANIFEST_NAME && !n.starts_with('.') && !TIMING_FILES.contains(&n.as_str()))
        .collect();
    names.sort();
    Ok(names)
}

/// Hash of every regular file in `dir` (names and contents), ignoring
/// manifests, hidden files and timing files.
pub fn hash_dir(dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for name in hashed_files(dir)? {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update(hash_file(&dir.join(&name))?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// Self-description of a stage output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    /// Hash of the stage's settings and inputs.
    pub fingerprint: String,
    /// File name to content hash for every output in the directory.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_frames: Vec<usize>,
}

impl Manifest {
    /// Describe the current contents of `dir`.
    pub fn describe(stage: &str, config_hash: &str, fingerprint: &str, dir: &Path) -> Result<Self> {
        let mut outputs = BTreeMap::new();
        for name in hashed_files(dir)? {
            outputs.insert(name.clone(), hash_file(&dir.join(&name))?);
        }
        Ok(Self {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            fingerprint: fingerprint.to_string(),
            outputs,
            skipped_frames: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Option<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_NAME)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// True when `dir` holds outputs produced from `fingerprint` and none
    /// of them has changed or gone missing.
    pub fn is_current(dir: &Path, fingerprint: &str) -> bool {
        let Some(m) = Self::read(dir) else {
            return false;
        };
        m.fingerprint == fingerprint
            && !m.outputs.is_empty()
            && m
                .outputs
                .iter()
                .all(|(name, hash)| hash_file(&dir.join(name)).is_ok_and(|h| &h == hash))
            && hashed_files(dir).is_ok_and(|names| names.len() == m.outputs.len())
    }
}

/// Remove and recreate a stage output directory.
pub fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Exclusive claim on an output root, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let path = root.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// CPU seconds consumed by the calling thread.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}
