//! Binary model files.
//!
//! ```text
//! "NCXNET" | version u32 | kind u8 | meta_len u32 | meta JSON
//! | layer descriptors | n_params u64 | n_params x f32 | crc32 u32
//! ```
//!
//! All integers and floats are little-endian. Dense descriptors are a layer
//! count followed by `(in u32, out u32, activation u8)` per layer; conv
//! descriptors are the eight `ConvShape` fields as u32. The CRC covers every
//! preceding byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, ConvNet, ConvShape, DenseNet, Network, NnError};
use crate::features::FeatureIndex;

pub const MAGIC: &[u8; 6] = b"NCXNET";
pub const FORMAT_VERSION: u32 = 1;

const KIND_DENSE: u8 = 1;
const KIND_CONV: u8 = 2;

/// Metadata stored with a model: the feature manifest it was trained
/// against, plus free-form string fields.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub manifest_name: String,
    pub manifest_hash: String,
    pub info: BTreeMap<String, String>,
}

impl ModelMeta {
    pub fn for_features(index: &FeatureIndex) -> Self {
        ModelMeta {
            manifest_name: index.name(),
            manifest_hash: index.hash(),
            info: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.info.insert(key.to_string(), value.into());
        self
    }

    pub fn check_manifest(&self, expected: &FeatureIndex) -> Result<(), NnError> {
        let want = expected.hash();
        if self.manifest_hash != want {
            return Err(NnError::ManifestMismatch {
                model: format!("{} {}", self.manifest_name, self.manifest_hash),
                expected: format!("{} {}", expected.name(), want),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyNet {
    Dense(DenseNet),
    Conv(ConvNet),
}

impl AnyNet {
    fn kind_name(&self) -> &'static str {
        match self {
            AnyNet::Dense(_) => "dense",
            AnyNet::Conv(_) => "conv",
        }
    }

    pub fn into_dense(self) -> Result<DenseNet, NnError> {
        match self {
            AnyNet::Dense(n) => Ok(n),
            other => Err(NnError::WrongKind {
                expected: "dense",
                found: other.kind_name(),
            }),
        }
    }

    pub fn into_conv(self) -> Result<ConvNet, NnError> {
        match self {
            AnyNet::Conv(n) => Ok(n),
            other => Err(NnError::WrongKind {
                expected: "conv",
                found: other.kind_name(),
            }),
        }
    }
}

pub fn encode_model(net: &AnyNet, meta: &ModelMeta) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let meta_json = serde_json::to_vec(meta).expect("metadata serializes");
    let params = match net {
        AnyNet::Dense(n) => {
            b.push(KIND_DENSE);
            push_meta(&mut b, &meta_json);
            b.extend_from_slice(&(n.layers() as u32).to_le_bytes());
            for l in 0..n.layers() {
                b.extend_from_slice(&(n.dims()[l] as u32).to_le_bytes());
                b.extend_from_slice(&(n.dims()[l + 1] as u32).to_le_bytes());
                b.push(match n.activations()[l] {
                    Activation::Relu => 0,
                    Activation::Linear => 1,
                });
            }
            n.params()
        }
        AnyNet::Conv(n) => {
            b.push(KIND_CONV);
            push_meta(&mut b, &meta_json);
            let s = n.shape();
            for v in [s.size, s.kernel1, s.filters1, s.pool1, s.kernel2, s.filters2, s.pool2, s.classes] {
                b.extend_from_slice(&(v as u32).to_le_bytes());
            }
            n.params()
        }
    };
    b.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &p in params {
        b.extend_from_slice(&(p as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

fn push_meta(b: &mut Vec<u8>, json: &[u8]) {
    b.extend_from_slice(&(json.len() as u32).to_le_bytes());
    b.extend_from_slice(json);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).ok_or(NnError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(NnError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn dim(&mut self) -> Result<usize, NnError> {
        let v = self.u32()? as usize;
        if v == 0 {
            return Err(NnError::Corrupt("zero dimension".into()));
        }
        Ok(v)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<(AnyNet, ModelMeta), NnError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(if bytes.len() < MAGIC.len() { NnError::Truncated } else { NnError::BadMagic });
    }
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(NnError::UnsupportedVersion(version));
    }
    if bytes.len() < r.pos + 4 {
        return Err(NnError::Truncated);
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    let mut r = Reader { bytes: body, pos: r.pos };
    let kind = r.u8()?;
    let meta_len = r.u32()? as usize;
    let meta: ModelMeta =
        serde_json::from_slice(r.take(meta_len)?).map_err(|e| NnError::Corrupt(format!("metadata: {e}")))?;
    let mut net = match kind {
        KIND_DENSE => {
            let layers = r.u32()? as usize;
            if layers == 0 || layers > 64 {
                return Err(NnError::Corrupt(format!("{layers} layers")));
            }
            let mut dims = Vec::with_capacity(layers + 1);
            let mut acts = Vec::with_capacity(layers);
            for l in 0..layers {
                let (i, o) = (r.dim()?, r.dim()?);
                if l == 0 {
                    dims.push(i);
                } else if dims[l] != i {
                    return Err(NnError::Corrupt(format!("layer {l} input {i} does not chain")));
                }
                dims.push(o);
                acts.push(match r.u8()? {
                    0 => Activation::Relu,
                    1 => Activation::Linear,
                    a => return Err(NnError::Corrupt(format!("activation {a}"))),
                });
            }
            AnyNet::Dense(DenseNet::zeros(&dims, &acts))
        }
        KIND_CONV => {
            let mut v = [0usize; 8];
            for x in &mut v {
                *x = r.dim()?;
            }
            let shape = ConvShape {
                size: v[0],
                kernel1: v[1],
                filters1: v[2],
                pool1: v[3],
                kernel2: v[4],
                filters2: v[5],
                pool2: v[6],
                classes: v[7],
            };
            if !shape.is_valid() {
                return Err(NnError::Corrupt(format!("invalid conv shape {shape:?}")));
            }
            AnyNet::Conv(ConvNet::zeros(shape))
        }
        k => return Err(NnError::Corrupt(format!("unknown model kind {k}"))),
    };
    let params = match &mut net {
        AnyNet::Dense(n) => n.params_mut(),
        AnyNet::Conv(n) => n.params_mut(),
    };
    let count = r.u64()? as usize;
    if count != params.len() {
        return Err(NnError::DimMismatch {
            expected: params.len(),
            found: count,
        });
    }
    let raw = r.take(count.checked_mul(4).ok_or(NnError::Truncated)?)?;
    for (p, chunk) in params.iter_mut().zip(raw.chunks_exact(4)) {
        *p = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
    }
    if r.pos != body.len() {
        return Err(NnError::Corrupt("trailing bytes".into()));
    }
    if stored != computed {
        return Err(NnError::Checksum { stored, computed });
    }
    Ok((net, meta))
}

pub fn save_model(path: &Path, net: &AnyNet, meta: &ModelMeta) -> Result<(), NnError> {
    std::fs::write(path, encode_model(net, meta))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(AnyNet, ModelMeta), NnError> {
    decode_model(&std::fs::read(path)?)
}
