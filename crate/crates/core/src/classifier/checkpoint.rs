//! Binary model container.
//!
//! Layout: the 8-byte magic `SBRCKPT1`, a little-endian `u64` header length,
//! a canonical JSON header, the tensor payloads as little-endian `f32`, and a
//! trailing little-endian `u64` checksum over every preceding byte. The
//! checksum is the first eight bytes of the SHA-256 digest and doubles as
//! the checkpoint identity.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::arch::CnnArchitecture;
use crate::classifier::model::Cnn;
use crate::classifier::train::{EpochStats, TrainConfig};
use crate::data::canonical_json;
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const MAGIC: &[u8; 8] = b"SBRCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Dbvae,
}

/// Architecture, weights and training metadata of a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub architecture: CnnArchitecture,
    /// Model-specific settings beyond the architecture (`null` for a CNN).
    pub model_config: serde_json::Value,
    pub train_config: TrainConfig,
    pub final_epoch: usize,
    pub history: Vec<EpochStats>,
    pub seed: u64,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<f32>>,
}

pub type CnnCheckpoint = Checkpoint;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset in `f32` elements from the start of the payload.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    model_kind: ModelKind,
    architecture: CnnArchitecture,
    model_config: serde_json::Value,
    train_config: TrainConfig,
    final_epoch: usize,
    history: Vec<EpochStats>,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

pub fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.names.len() != self.tensors.len() {
            return Err(Error::Checkpoint("tensor names and tensors differ in count".into()));
        }
        let mut offset = 0;
        let entries = self
            .names
            .iter()
            .zip(&self.tensors)
            .map(|(name, t)| {
                let e = TensorEntry { name: name.clone(), shape: t.shape().to_vec(), offset };
                offset += t.len();
                e
            })
            .collect();
        let header = Header {
            format_version: FORMAT_VERSION,
            model_kind: self.kind,
            architecture: self.architecture.clone(),
            model_config: self.model_config.clone(),
            train_config: self.train_config.clone(),
            final_epoch: self.final_epoch,
            history: self.history.clone(),
            seed: self.seed,
            tensors: entries,
        };
        let json = canonical_json(&header)?;
        let mut out = Vec::with_capacity(24 + json.len() + 4 * offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(json.as_bytes());
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    /// Parses a full checkpoint image. The magic is checked first, then the
    /// checksum, then the header and tensor directory.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        if bytes.len() < 24 {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        let computed = checksum(body);
        if stored != computed {
            return Err(Error::Integrity { stored, computed });
        }
        let hlen = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes"));
        let hlen = usize::try_from(hlen).ok().filter(|&h| h <= body.len() - 16);
        let Some(hlen) = hlen else {
            return Err(Error::Checkpoint("header length exceeds file size".into()));
        };
        let header: Header = serde_json::from_slice(&body[16..16 + hlen])
            .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let payload = &body[16 + hlen..];
        if payload.len() % 4 != 0 {
            return Err(Error::Checkpoint("payload is not a whole number of f32 values".into()));
        }
        let n_floats = payload.len() / 4;
        let mut expected_offset = 0;
        let mut names = Vec::with_capacity(header.tensors.len());
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            let len: usize = e.shape.iter().product();
            if e.offset != expected_offset || e.offset + len > n_floats {
                return Err(Error::Checkpoint(format!(
                    "tensor {} (shape {:?}) does not fit the payload",
                    e.name, e.shape
                )));
            }
            let data = payload[4 * e.offset..4 * (e.offset + len)]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let t = Tensor::new(&e.shape, data).map_err(|err| Error::Checkpoint(format!("tensor {}: {err}", e.name)))?;
            names.push(e.name.clone());
            tensors.push(t);
            expected_offset += len;
        }
        if expected_offset != n_floats {
            return Err(Error::Checkpoint(format!(
                "payload holds {n_floats} values but the directory describes {expected_offset}"
            )));
        }
        Ok(Self {
            kind: header.model_kind,
            architecture: header.architecture,
            model_config: header.model_config,
            train_config: header.train_config,
            final_epoch: header.final_epoch,
            history: header.history,
            seed: header.seed,
            names,
            tensors,
        })
    }

    /// Hex form of the checksum of the serialized checkpoint.
    pub fn id(&self) -> Result<String> {
        let bytes = self.to_bytes()?;
        Ok(id_of_bytes(&bytes))
    }

    /// The CNN stored in this checkpoint; errors for other model kinds or
    /// when the tensor shapes disagree with the architecture.
    pub fn to_cnn(&self) -> Result<Cnn<f32>> {
        if self.kind != ModelKind::Cnn {
            return Err(Error::Checkpoint(format!("expected a cnn checkpoint, found {:?}", self.kind)));
        }
        Cnn::from_params(self.architecture.clone(), self.tensors.clone())
    }
}

pub fn id_of_bytes(bytes: &[u8]) -> String {
    let tail: [u8; 8] = bytes[bytes.len() - 8..].try_into().expect("8 bytes");
    format!("{:016x}", u64::from_le_bytes(tail))
}

/// Writes the checkpoint and returns its identity.
pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = ckpt.to_bytes()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, &bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(id_of_bytes(&bytes))
}

/// Reads a checkpoint. The magic is verified from the first eight bytes
/// before the rest of the file is read.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let ctx = || format!("reading {}", path.display());
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(ctx(), e))?;
    let mut magic = [0u8; 8];
    let mut got = 0;
    while got < 8 {
        match file.read(&mut magic[got..]).map_err(|e| Error::io(ctx(), e))? {
            0 => break,
            n => got += n,
        }
    }
    if got < 8 || &magic != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint file (bad magic)", path.display())));
    }
    let mut bytes = magic.to_vec();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(ctx(), e))?;
    Checkpoint::from_bytes(&bytes)
}
