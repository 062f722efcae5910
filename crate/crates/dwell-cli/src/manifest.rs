//! Run manifest: config hash, toolkit version, checksummed output files,
//! wall-clock timings. Written last so its presence marks a completed run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct TimingEntry {
    label: String,
    seconds: f64,
}

pub struct Manifest {
    config_hash: String,
    version: &'static str,
    files: Vec<FileEntry>,
    timings: Vec<TimingEntry>,
    root: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

impl Manifest {
    pub fn new(root: &Path, config_text: &str) -> Manifest {
        Manifest {
            config_hash: sha256_hex(config_text.as_bytes()),
            version: env!("CARGO_PKG_VERSION"),
            files: Vec::new(),
            timings: Vec::new(),
            root: root.to_path_buf(),
        }
    }

    /// Record an already-written output file.
    pub fn add_file(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = fs::read(path)?;
        let rel = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .to_string();
        self.files.push(FileEntry {
            path: rel,
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(TimingEntry {
            label: label.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn add_timing(&mut self, label: &str, seconds: f64) {
        self.timings.push(TimingEntry {
            label: label.to_string(),
            seconds,
        });
    }

    /// Write `manifest.json`; call after every artifact has been recorded.
    pub fn finalize(self) -> std::io::Result<PathBuf> {
        #[derive(Serialize)]
        struct Out<'a> {
            config_sha256: &'a str,
            toolkit_version: &'a str,
            files: &'a [FileEntry],
            timings: &'a [TimingEntry],
        }
        let path = self.root.join("manifest.json");
        fs::create_dir_all(&self.root)?;
        let body = serde_json::to_string_pretty(&Out {
            config_sha256: &self.config_hash,
            toolkit_version: self.version,
            files: &self.files,
            timings: &self.timings,
        })
        .expect("serializable");
        fs::write(&path, body + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_files_and_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let f1 = dir.path().join("a.csv");
        fs::write(&f1, "x\n1.0\n").unwrap();
        let mut m = Manifest::new(dir.path(), "config-bytes");
        m.add_file(&f1).unwrap();
        m.add_timing("stage", 0.25);
        let path = m.finalize().unwrap();
        let text = fs::read_to_string(path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["files"][0]["path"], "a.csv");
        assert_eq!(v["files"][0]["sha256"], sha256_hex(b"x\n1.0\n"));
        assert_eq!(v["config_sha256"], sha256_hex(b"config-bytes"));
    }
}
