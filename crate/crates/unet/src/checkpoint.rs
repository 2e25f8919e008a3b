//! Single-file weight checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"WMSEGCKP"  u32 version  u64 manifest_len  manifest (UTF-8 JSON)
//! u64 data_len  data (f32 LE, data_len bytes)
//! ```
//!
//! The manifest carries the config, its fingerprint, the epoch, the validation
//! Dice and an index of `(name, shape, offset, len)` into the data block.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ModelWeights, NamedTensor, UNet, UNetConfig};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"WMSEGCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: UNetConfig,
    pub epoch: usize,
    pub val_dice: Option<f64>,
    pub weights: ModelWeights,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    fingerprint: String,
    config: UNetConfig,
    epoch: usize,
    val_dice: Option<f64>,
    tensors: Vec<TensorEntry>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| bad(format!("truncated {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8, what)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| bad(format!("{what} {v} too large")))
    }
}

impl Checkpoint {
    pub fn from_model(model: &UNet, epoch: usize, val_dice: Option<f64>) -> Checkpoint {
        Checkpoint {
            config: *model.config(),
            epoch,
            val_dice,
            weights: model.weights().clone(),
        }
    }

    pub fn into_model(self) -> Result<UNet> {
        UNet::from_weights(self.config, self.weights)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut offset = 0;
        let tensors = self
            .weights
            .tensors
            .iter()
            .map(|t| {
                let e = TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    offset,
                    len: t.data.len(),
                    trainable: t.trainable,
                };
                offset += t.data.len();
                e
            })
            .collect();
        let manifest = Manifest {
            fingerprint: self.weights.fingerprint.clone(),
            config: self.config,
            epoch: self.epoch,
            val_dice: self.val_dice.filter(|v| v.is_finite()),
            tensors,
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(28 + json.len() + 4 * offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&((4 * offset) as u64).to_le_bytes());
        for t in &self.weights.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mlen = r.u64("manifest length")?;
        let manifest: Manifest = serde_json::from_slice(r.take(mlen, "manifest")?)
            .map_err(|e| bad(format!("manifest: {e}")))?;
        let dlen = r.u64("data length")?;
        if dlen % 4 != 0 {
            return Err(bad("data length is not a multiple of 4"));
        }
        let data = r.take(dlen, "tensor data")?;
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        manifest.config.validate()?;
        if manifest.fingerprint != manifest.config.fingerprint() {
            return Err(bad(format!(
                "fingerprint `{}` does not match stored config `{}`",
                manifest.fingerprint,
                manifest.config.fingerprint()
            )));
        }
        let n_values = dlen / 4;
        let mut tensors = Vec::with_capacity(manifest.tensors.len().min(1024));
        for e in manifest.tensors {
            let end = e
                .offset
                .checked_add(e.len)
                .filter(|&x| x <= n_values)
                .ok_or_else(|| bad(format!("tensor `{}` lies outside the data block", e.name)))?;
            let count = e.shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            if count != Some(e.len) {
                return Err(bad(format!(
                    "tensor `{}`: shape {:?} does not hold {} values",
                    e.name, e.shape, e.len
                )));
            }
            let values = data[4 * e.offset..4 * end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(NamedTensor {
                name: e.name,
                shape: e.shape,
                data: values,
                trainable: e.trainable,
            });
        }
        Ok(Checkpoint {
            config: manifest.config,
            epoch: manifest.epoch,
            val_dice: manifest.val_dice,
            weights: ModelWeights {
                fingerprint: manifest.fingerprint,
                tensors,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        // Write-then-rename so an interrupted run never leaves a torn checkpoint.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.encode()).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Checkpoint::decode(&bytes)
    }
}
