//! Model file format.
//!
//! ```text
//! "CSIM"                      magic
//! u32 LE                      format version
//! u32 LE + JSON bytes         config block (dims, training config,
//!                             vocabulary, frequency and similarity tables)
//! u32 LE                      record count
//! per record:
//!   u32 LE + UTF-8            name
//!   u32 LE                    rank
//!   u32 LE × rank             dims
//!   f32 LE × Π dims           row-major values
//! u32 LE                      CRC-32 of everything above
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingOrigin, Vocabulary};
use crate::error::{Error, Result};
use crate::features::{FeatureResources, FrozenEmbeddings, InformationContent, WordSimilarityProvider};
use crate::model::{Model, ModelDims, ModelParams};
use crate::numkit::{Matrix, Scalar};
use crate::params::Parameters;
use crate::trainer::TrainConfig;

pub const MAGIC: &[u8; 4] = b"CSIM";
pub const FORMAT_VERSION: u32 = 1;

const FEATURE_EMBEDDINGS: &str = "features.embeddings";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigBlock {
    dims: ModelDims,
    origin: EmbeddingOrigin,
    train_config: Option<TrainConfig>,
    vocabulary: Vec<String>,
    frequencies: Vec<(String, u64)>,
    similarities: Vec<(String, String, f64, f64)>,
}

/// A model plus the training configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    pub model: Model<T>,
    pub train_config: Option<TrainConfig>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Bundle(format!("value {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_record(out: &mut Vec<u8>, name: &str, m: &Matrix<f32>) -> Result<()> {
    put_u32(out, name.len())?;
    out.extend_from_slice(name.as_bytes());
    put_u32(out, 2)?;
    put_u32(out, m.rows())?;
    put_u32(out, m.cols())?;
    for x in m.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(())
}

impl<T: Scalar> ModelBundle<T> {
    pub fn new(model: Model<T>, train_config: Option<TrainConfig>) -> Self {
        ModelBundle { model, train_config }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let config = ConfigBlock {
            dims: m.dims,
            origin: m.origin,
            train_config: self.train_config,
            vocabulary: m.vocab.tokens().to_vec(),
            frequencies: m
                .features
                .ic
                .frequencies()
                .iter()
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
            similarities: m.features.similarities.entries(),
        };
        let json = serde_json::to_vec(&config).map_err(|e| Error::Bundle(e.to_string()))?;

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_u32(&mut out, json.len())?;
        out.extend_from_slice(&json);
        let params = m.params.params();
        put_u32(&mut out, params.len() + 1)?;
        for (name, tensor) in params {
            put_record(&mut out, &name, &tensor.cast())?;
        }
        put_record(&mut out, FEATURE_EMBEDDINGS, &m.features.embeddings.matrix.cast())?;
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Bundle("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::Bundle("checksum mismatch (truncated or corrupted file)".into()));
        }
        let mut r = Reader { bytes: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Bundle("not a model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Bundle(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let json_len = r.u32()? as usize;
        let config: ConfigBlock =
            serde_json::from_slice(r.take(json_len)?).map_err(|e| Error::Bundle(format!("config block: {e}")))?;

        let count = r.u32()? as usize;
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            records.push(r.record()?);
        }
        if r.pos != body.len() {
            return Err(Error::Bundle("trailing bytes after records".into()));
        }

        let vocab = Vocabulary::from_tokens(config.vocabulary);
        let dims = config.dims;
        dims.validate()?;
        let mut params = ModelParams::<T>::zeros(&dims, vocab.len());
        let mut slots = params.params_mut();
        if records.len() != slots.len() + 1 {
            return Err(Error::Bundle(format!(
                "expected {} tensors, found {}",
                slots.len() + 1,
                records.len()
            )));
        }
        let mut records = records.into_iter();
        for (name, slot) in slots.iter_mut() {
            let (rec_name, m) = records.next().expect("count checked");
            if &rec_name != name {
                return Err(Error::Bundle(format!("expected tensor {name}, found {rec_name}")));
            }
            if m.shape() != slot.shape() {
                return Err(Error::Bundle(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    m.shape(),
                    slot.shape()
                )));
            }
            **slot = m.cast();
        }
        drop(slots);
        let (rec_name, frozen) = records.next().expect("count checked");
        if rec_name != FEATURE_EMBEDDINGS || frozen.rows() != vocab.len() {
            return Err(Error::Bundle("missing or malformed feature embeddings".into()));
        }

        let mut sims = WordSimilarityProvider::new();
        for (a, b, p, l) in config.similarities {
            sims.insert(&a, &b, p, l).map_err(|e| Error::Bundle(e.to_string()))?;
        }
        let features = FeatureResources {
            embeddings: FrozenEmbeddings {
                vocab: vocab.clone(),
                matrix: frozen.cast(),
            },
            ic: InformationContent::from_frequencies(config.frequencies.into_iter().collect()),
            similarities: sims,
        };
        Ok(ModelBundle {
            model: Model {
                dims,
                vocab,
                origin: config.origin,
                params,
                features,
            },
            train_config: config.train_config,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Bundle(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn record(&mut self) -> Result<(String, Matrix<f32>)> {
        let len = self.u32()? as usize;
        let name = String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Bundle("tensor name is not UTF-8".into()))?;
        let rank = self.u32()? as usize;
        if !(1..=2).contains(&rank) {
            return Err(Error::Bundle(format!("tensor {name} has unsupported rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(self.u32()? as usize);
        }
        let (rows, cols) = (dims[0], dims.get(1).copied().unwrap_or(1));
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Bundle(format!("tensor {name} is too large")))?;
        let data = self
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok((name, Matrix::from_vec(rows, cols, data)?))
    }
}
