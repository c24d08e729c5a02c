//! Binary training-state snapshots.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PSCP"  u16 version  [32] config digest  u64 seed  u64 checkpoint
//! u64 update_counter  u32 n_blocks
//! n_blocks x { u16 name_len, name, u64 n_values, n_values x f32 }
//! [32] SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use lexphase_core::manifest::{sha256_digest, write_atomic};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::optim::TrainState;

pub const MAGIC: &[u8; 4] = b"PSCP";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub config_digest: [u8; 32],
    pub seed: u64,
    pub checkpoint: u64,
    pub state: TrainState,
}

fn push_block(out: &mut Vec<u8>, name: &str, values: &[f32]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = &self.state;
        let mut out = Vec::with_capacity(16 * s.model.n_params() + 128);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_digest);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.checkpoint.to_le_bytes());
        out.extend_from_slice(&s.update_counter.to_le_bytes());
        out.extend_from_slice(&3u32.to_le_bytes());
        push_block(&mut out, "params", &s.model.params);
        push_block(&mut out, "adam_m", &s.m);
        push_block(&mut out, "adam_v", &s.v);
        let digest = sha256_digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8], cfg: &ModelConfig) -> std::result::Result<Self, String> {
        if bytes.len() < 32 {
            return Err("truncated".into());
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if sha256_digest(body) != digest {
            return Err("checksum mismatch".into());
        }
        let mut r = Reader { buf: body };
        if r.take(4)? != MAGIC {
            return Err("bad magic".into());
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let config_digest: [u8; 32] = r.array()?;
        let seed = u64::from_le_bytes(r.array()?);
        let checkpoint = u64::from_le_bytes(r.array()?);
        let update_counter = u64::from_le_bytes(r.array()?);
        let n_blocks = u32::from_le_bytes(r.array()?);
        let mut params = None;
        let mut m = None;
        let mut v = None;
        for _ in 0..n_blocks {
            let name_len = u16::from_le_bytes(r.array()?) as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| "block name is not UTF-8")?;
            let n = u64::from_le_bytes(r.array()?) as usize;
            let raw = r.take(n.checked_mul(4).ok_or("block too large")?)?;
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            match name.as_str() {
                "params" => params = Some(values),
                "adam_m" => m = Some(values),
                "adam_v" => v = Some(values),
                other => return Err(format!("unknown block {other:?}")),
            }
        }
        if !r.buf.is_empty() {
            return Err("trailing bytes".into());
        }
        let (params, m, v) = match (params, m, v) {
            (Some(p), Some(m), Some(v)) => (p, m, v),
            _ => return Err("missing block".into()),
        };
        let n = cfg.n_params();
        if params.len() != n || m.len() != n || v.len() != n {
            return Err(format!("blocks do not match the {n}-parameter layout"));
        }
        let model = Model::from_params(cfg, params).map_err(|e| e.to_string())?;
        Ok(Self {
            config_digest,
            seed,
            checkpoint,
            state: TrainState::from_parts(model, m, v, update_counter),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    /// Loads a snapshot and checks it belongs to the given configuration.
    pub fn load(path: &Path, cfg: &ModelConfig, config_digest: &[u8; 32]) -> Result<Self> {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        let snap = Self::from_bytes(&bytes, cfg).map_err(|reason| Error::Snapshot {
            path: path.to_path_buf(),
            reason,
        })?;
        if &snap.config_digest != config_digest {
            return Err(Error::Snapshot {
                path: path.to_path_buf(),
                reason: "written by a different configuration".into(),
            });
        }
        Ok(snap)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.buf.len() < n {
            return Err("truncated".into());
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshot() -> Snapshot {
        let cfg = ModelConfig {
            embed_dim: 8,
            n_layers: 1,
            n_heads: 2,
            context_len: 4,
            vocab_size: 5,
        };
        let mut state = TrainState::new(Model::new(&cfg, 1).unwrap());
        state.m[3] = 0.25;
        state.v[7] = -1.5e-9;
        state.update_counter = 42;
        Snapshot {
            config_digest: [7; 32],
            seed: 9,
            checkpoint: 3,
            state,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let s = snapshot();
        let cfg = s.state.model.config().clone();
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"PSCP");
        assert_eq!(Snapshot::from_bytes(&bytes, &cfg).unwrap(), s);
    }

    #[test]
    fn corruption_is_detected() {
        let s = snapshot();
        let cfg = s.state.model.config().clone();
        let mut bytes = s.to_bytes();
        bytes[60] ^= 1;
        assert_eq!(
            Snapshot::from_bytes(&bytes, &cfg).unwrap_err(),
            "checksum mismatch"
        );
        assert!(Snapshot::from_bytes(&bytes[..10], &cfg).is_err());
    }

    #[test]
    fn foreign_config_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.pscp");
        let s = snapshot();
        let cfg = s.state.model.config().clone();
        s.save(&path).unwrap();
        assert!(Snapshot::load(&path, &cfg, &[7; 32]).is_ok());
        assert!(matches!(
            Snapshot::load(&path, &cfg, &[8; 32]),
            Err(Error::Snapshot { .. })
        ));
    }
}
