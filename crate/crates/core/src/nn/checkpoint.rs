//! Checkpoint archive: `"VCKP"`, version, header length, a JSON header, then
//! one VCOF-framed f32 blob per parameter tensor in header order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeffs::VCOF_MAGIC;
use crate::error::{Error, Result};
use crate::format::{decode_blob_prefix, encode_blob, read_file, read_u32, write_file, FORMAT_VERSION};
use crate::nn::model::{ModelConfig, ModelParams};
use crate::nn::tensor::{ParamKind, Parameterized};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VCKP";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: ParamKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    metadata: BTreeMap<String, serde_json::Value>,
}

/// Parameters plus free-form metadata (task, epoch, validation loss...).
/// Parameters are stored as f32, so saving rounds them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let named = self.params.named_tensors();
        let header = Header {
            config: self.params.config.clone(),
            tensors: named
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    rows: t.rows,
                    cols: t.cols,
                    kind: t.kind,
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in named {
            let data: Vec<f32> = t.data.iter().map(|&v| v as f32).collect();
            out.extend(encode_blob(VCOF_MAGIC, t.rows, t.cols, &data));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::format(
                "header",
                format!("{} bytes, need at least 12", bytes.len()),
            ));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::format(
                "magic",
                format!("expected VCKP, found {:?}", &bytes[..4]),
            ));
        }
        let version = read_u32(&bytes[4..8]);
        if version != FORMAT_VERSION {
            return Err(Error::format("version", format!("unsupported version {version}")));
        }
        let header_len = read_u32(&bytes[8..12]) as usize;
        let json = bytes
            .get(12..12 + header_len)
            .ok_or_else(|| Error::format("header", "truncated JSON header"))?;
        let header: Header = serde_json::from_slice(json)?;
        header.config.check()?;
        let mut params = ModelParams::zeros(header.config);
        let mut offset = 12 + header_len;
        {
            let mut named = params.named_tensors_mut();
            if named.len() != header.tensors.len() {
                return Err(Error::format(
                    "tensors",
                    format!(
                        "expected {} tensors, header lists {}",
                        named.len(),
                        header.tensors.len()
                    ),
                ));
            }
            for ((name, t), entry) in named.iter_mut().zip(&header.tensors) {
                if *name != entry.name || t.rows != entry.rows || t.cols != entry.cols || t.kind != entry.kind {
                    return Err(Error::format(
                        "tensors",
                        format!(
                            "entry `{}` {}x{} does not match model tensor `{name}` {}x{}",
                            entry.name, entry.rows, entry.cols, t.rows, t.cols
                        ),
                    ));
                }
                let (blob, used) = decode_blob_prefix(VCOF_MAGIC, &bytes[offset..])?;
                if blob.rows != t.rows || blob.cols != t.cols {
                    return Err(Error::format("tensors", format!("blob shape mismatch for `{name}`")));
                }
                t.data = blob.data.iter().map(|&v| v as f64).collect();
                offset += used;
            }
        }
        if offset != bytes.len() {
            return Err(Error::format(
                "payload",
                format!("{} trailing bytes", bytes.len() - offset),
            ));
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters"));
        }
        Ok(Self {
            params,
            metadata: header.metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
