use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::SentencePair;
use crate::error::{Error, Result};
use crate::numkit::SeededRng;

pub const MIN_SPLIT_PAIRS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SentencePair>,
    pub validation: Vec<SentencePair>,
    pub seed: u64,
}

/// Seeded Fisher–Yates shuffle, then the first ⌊0.8·n⌋ pairs go to training.
pub fn split_80_20(pairs: &[SentencePair], seed: u64) -> Result<DatasetSplit> {
    if pairs.len() < MIN_SPLIT_PAIRS {
        return Err(Error::Config(format!(
            "need at least {MIN_SPLIT_PAIRS} pairs to split, got {}",
            pairs.len()
        )));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let n_train = pairs.len() * 4 / 5;
    let pick = |idx: &[usize]| idx.iter().map(|&i| pairs[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..]),
        seed,
    })
}

/// Shuffled mini-batches of indices into a dataset of `n` items.
///
/// A trailing batch of exactly one item is dropped: correlation over a
/// single sample is undefined.
pub fn batch_indices(n: usize, batch_size: usize, rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(Error::Config(format!(
            "batch size must be at least 2, got {batch_size}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    Ok(order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect())
}

pub fn batches<'a>(
    pairs: &'a [SentencePair],
    batch_size: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<&'a SentencePair>>> {
    Ok(batch_indices(pairs.len(), batch_size, rng)?
        .into_iter()
        .map(|b| b.into_iter().map(|i| &pairs[i]).collect())
        .collect())
}

/// Reads a `token<TAB>count` file.
pub fn load_frequencies(path: impl AsRef<Path>) -> Result<BTreeMap<String, u64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let (token, count) = line
            .split_once('\t')
            .ok_or_else(|| err("expected token<TAB>count".into()))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid count {count:?}")))?;
        *out.entry(token.trim().to_lowercase()).or_insert(0) += count;
    }
    Ok(out)
}
