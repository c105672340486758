use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::numkit::{init_uniform, Matrix, Scalar, SeededRng};

/// Scale of the uniform draw for rows without a pretrained vector.
pub const RANDOM_ROW_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingOrigin {
    /// Random init (RI).
    Random,
    /// Word-vector init (WI).
    Pretrained,
}

/// On-disk layout of a word-vector file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

/// Loads a word-vector file in either layout.
pub fn load_embeddings<T: Scalar>(
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
    vocab: &Vocabulary,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable<T>> {
    match format {
        EmbeddingFormat::Text => load_embeddings_text(path, vocab, rng),
        EmbeddingFormat::Binary => load_embeddings_binary(path, vocab, rng),
    }
}

/// Trainable token vectors, one row per vocabulary entry (UNK is row 0).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    pub matrix: Matrix<T>,
    pub origin: EmbeddingOrigin,
    /// Rows copied from a pretrained file.
    pub pretrained_rows: usize,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn random(vocab: &Vocabulary, dim: usize, rng: &mut SeededRng) -> Self {
        EmbeddingTable {
            matrix: init_uniform(vocab.len(), dim, RANDOM_ROW_SCALE, rng),
            origin: EmbeddingOrigin::Random,
            pretrained_rows: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn row(&self, index: usize) -> &[T] {
        self.matrix.row(index)
    }

    fn from_vectors(vocab: &Vocabulary, dim: usize, vectors: &BTreeMap<usize, Vec<f32>>, rng: &mut SeededRng) -> Self {
        let mut table = Self::random(vocab, dim, rng);
        for (&idx, v) in vectors {
            for (dst, &src) in table.matrix.row_mut(idx).iter_mut().zip(v) {
                *dst = T::lit(src as f64);
            }
        }
        table.origin = EmbeddingOrigin::Pretrained;
        table.pretrained_rows = vectors.len();
        table
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Loads `token v1 .. vD` lines, with an optional `count dim` header.
///
/// Only vocabulary tokens are kept; every other row (UNK included) is drawn
/// uniformly from `[-0.05, 0.05]`.
pub fn load_embeddings_text<T: Scalar>(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut dim: Option<usize> = None;
    let mut vectors = BTreeMap::new();
    let mut seen = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if line_no == 1 && values.len() == 1 {
            let header = (token.parse::<usize>(), values[0].parse::<usize>());
            if let (Ok(_), Ok(d)) = header {
                dim = Some(d);
                continue;
            }
        }
        let parsed: std::result::Result<Vec<f32>, _> = values.iter().map(|v| v.parse::<f32>()).collect();
        let parsed = parsed.map_err(|e| format_err(path, format!("line {line_no}: {e}")))?;
        match dim {
            None => dim = Some(parsed.len()),
            Some(d) if d != parsed.len() => {
                return Err(format_err(
                    path,
                    format!("line {line_no}: expected {d} values, found {}", parsed.len()),
                ))
            }
            _ => {}
        }
        if parsed.is_empty() {
            return Err(format_err(path, format!("line {line_no}: no vector values")));
        }
        seen += 1;
        if vocab.contains(token) {
            vectors.insert(vocab.lookup(token), parsed);
        }
    }
    finish(path, vocab, dim, seen, vectors, rng)
}

fn finish<T: Scalar>(
    path: &Path,
    vocab: &Vocabulary,
    dim: Option<usize>,
    seen: usize,
    vectors: BTreeMap<usize, Vec<f32>>,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable<T>> {
    let dim = match dim {
        Some(d) if d > 0 && seen > 0 => d,
        _ => return Err(format_err(path, "file contains no vectors")),
    };
    if vectors.is_empty() {
        return Err(format_err(path, "no vocabulary token has a vector"));
    }
    Ok(EmbeddingTable::from_vectors(vocab, dim, &vectors, rng))
}

/// Loads the word2vec binary layout: ASCII `count dim\n`, then per word a
/// space-terminated token followed by `dim` little-endian `f32`s.
pub fn load_embeddings_binary<T: Scalar>(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err(path, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| format_err(path, "header is not ASCII"))?;
    let mut parts = header.split_whitespace().map(str::parse::<usize>);
    let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(c)), Some(Ok(d)), None) => (c, d),
        _ => return Err(format_err(path, format!("bad header {header:?}"))),
    };
    if count == 0 || dim == 0 {
        return Err(format_err(path, "header declares no vectors"));
    }
    let mut pos = header_end + 1;

    let mut vectors = BTreeMap::new();
    for _ in 0..count {
        // Some writers emit a newline after each vector.
        while pos < bytes.len() && (bytes[pos] == b'\n' || bytes[pos] == b'\r') {
            pos += 1;
        }
        let start = pos;
        let space = bytes[pos..]
            .iter()
            .position(|&b| b == b' ')
            .ok_or_else(|| format_err(path, format!("truncated token at byte {start}")))?;
        let token = std::str::from_utf8(&bytes[pos..pos + space])
            .map_err(|_| format_err(path, format!("token at byte {start} is not UTF-8")))?;
        pos += space + 1;
        let need = dim * 4;
        if bytes.len() < pos + need {
            return Err(format_err(
                path,
                format!(
                    "truncated vector at byte {pos}: need {need} bytes, {} left",
                    bytes.len() - pos
                ),
            ));
        }
        if vocab.contains(token) {
            let v: Vec<f32> = bytes[pos..pos + need]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            vectors.insert(vocab.lookup(token), v);
        }
        pos += need;
    }
    finish(path, vocab, Some(dim), count, vectors, rng)
}

/// Writes vectors in the text layout, with header.
pub fn write_embeddings_text<W: Write>(mut out: W, rows: &[(String, Vec<f32>)]) -> std::io::Result<()> {
    let dim = rows.first().map_or(0, |r| r.1.len());
    writeln!(out, "{} {}", rows.len(), dim)?;
    for (token, v) in rows {
        write!(out, "{token}")?;
        for x in v {
            // `{:?}` prints the shortest representation that parses back exactly.
            write!(out, " {x:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes vectors in the word2vec binary layout.
pub fn write_embeddings_binary<W: Write>(mut out: W, rows: &[(String, Vec<f32>)]) -> std::io::Result<()> {
    let dim = rows.first().map_or(0, |r| r.1.len());
    writeln!(out, "{} {}", rows.len(), dim)?;
    for (token, v) in rows {
        out.write_all(token.as_bytes())?;
        out.write_all(b" ")?;
        for x in v {
            out.write_all(&x.to_le_bytes())?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}
