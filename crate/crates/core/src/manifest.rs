//! Run manifests: the index that ties generated samples, loss logs and
//! snapshots to the exact configuration and corpus that produced them.
//!
//! Artifact paths are stored relative to the directory holding
//! `manifest.json`, so a run directory can be moved or archived whole.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRef {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub seed: u64,
    pub checkpoint: u64,
    pub path: PathBuf,
    pub sha256: String,
    /// Seed of the decoding RNG, when sampling was stochastic.
    pub sample_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// `"train"` or `"synth"`.
    pub kind: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub corpus: CorpusRef,
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<u64>,
    pub samples: Vec<SampleRecord>,
    pub loss_log: Option<PathBuf>,
    pub snapshots: Vec<PathBuf>,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes `manifest.json` into `dir` atomically.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }

    /// Sample for one `(seed, checkpoint)` pair.
    pub fn sample(&self, seed: u64, checkpoint: u64) -> Option<&SampleRecord> {
        self.samples
            .iter()
            .find(|s| s.seed == seed && s.checkpoint == checkpoint)
    }

    /// Checks that every referenced sample exists and matches its hash.
    pub fn verify(&self, run_dir: impl AsRef<Path>) -> Result<()> {
        let dir = run_dir.as_ref();
        for s in &self.samples {
            let path = dir.join(&s.path);
            let digest = file_sha256(&path)?;
            if digest != s.sha256 {
                return Err(Error::Manifest(format!(
                    "{} does not match its recorded hash",
                    s.path.display()
                )));
            }
        }
        Ok(())
    }
}

/// SHA-256 of a serializable value's canonical JSON. Object keys are
/// emitted in sorted order, so equal configurations hash equally.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    Ok(hex::encode(config_digest(config)?))
}

/// Raw form of [`config_hash`].
pub fn config_digest<T: Serialize>(config: &T) -> Result<[u8; 32]> {
    let value = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&value)?;
    Ok(sha256_digest(canonical.as_bytes()))
}

pub fn bytes_sha256(bytes: &[u8]) -> String {
    hex::encode(sha256_digest(bytes))
}

pub fn sha256_digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(bytes_sha256(&bytes))
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partially written file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn config_hash_ignores_key_order() {
        let a = json!({"b": 1, "a": {"y": 2, "x": 3}});
        let b: serde_json::Value =
            serde_json::from_str(r#"{"a": {"x": 3, "y": 2}, "b": 1}"#).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_ne!(
            config_hash(&a).unwrap(),
            config_hash(&json!({"b": 2})).unwrap()
        );
    }

    #[test]
    fn roundtrip_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path().join("samples/seed0/ckpt0.txt"), b"hello").unwrap();
        let m = RunManifest {
            kind: "synth".into(),
            config: json!({"x": 1}),
            config_hash: config_hash(&json!({"x": 1})).unwrap(),
            corpus: CorpusRef {
                path: "corpus.txt".into(),
                sha256: bytes_sha256(b"c"),
            },
            seeds: vec![0],
            checkpoints: vec![0],
            samples: vec![SampleRecord {
                seed: 0,
                checkpoint: 0,
                path: "samples/seed0/ckpt0.txt".into(),
                sha256: bytes_sha256(b"hello"),
                sample_seed: None,
            }],
            loss_log: None,
            snapshots: vec![],
        };
        m.save(dir.path()).unwrap();
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        back.verify(dir.path()).unwrap();
        assert!(back.sample(0, 0).is_some() && back.sample(1, 0).is_none());

        fs::write(dir.path().join("samples/seed0/ckpt0.txt"), b"tampered").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Manifest(_))));
    }
}
