//! Surface similarity features for a sentence pair.
//!
//! Eight values, all in `[0, 1]` and symmetric in the two sentences:
//!
//! | idx | feature |
//! |-----|---------|
//! | 0–2 | uni/bi/trigram overlap (set semantics, harmonic mean of both coverages) |
//! | 3   | soft overlap under PathLen word similarity |
//! | 4   | soft overlap under Lin word similarity |
//! | 5   | cosine of information-content-weighted embedding sums |
//! | 6   | greedy embedding alignment coverage, IC-weighted |
//! | 7   | length ratio `min(n₁,n₂)/max(n₁,n₂)` |
//!
//! Features are computed once from frozen resources and fed to the scorer as
//! constants.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::corpus::{SentencePair, Vocabulary};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Scalar};

pub const FEATURE_COUNT: usize = 8;
pub const ALIGNMENT_THRESHOLD: f64 = 0.5;

const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.0.iter().map(|&x| T::lit(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMeasure {
    PathLen,
    Lin,
}

/// Precomputed knowledge-based word similarities.
///
/// Pairs missing from the table score 1 for identical tokens and 0 otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordSimilarityProvider {
    table: HashMap<(String, String), (f64, f64)>,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl WordSimilarityProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: &str, b: &str, pathlen: f64, lin: f64) -> Result<()> {
        for v in [pathlen, lin] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Contract(format!("word similarity {v} outside [0, 1]")));
            }
        }
        if a != b {
            self.table.insert(ordered(a, b), (pathlen, lin));
        }
        Ok(())
    }

    /// Reads `w1<TAB>w2<TAB>pathlen<TAB>lin` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut out = Self::new();
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
            let f: Vec<&str> = line.split('\t').collect();
            let [a, b, p, l] = f.as_slice() else {
                return Err(err(format!("expected 4 fields, found {}", f.len())));
            };
            let num = |s: &str| -> Result<f64> {
                let v: f64 = s.trim().parse().map_err(|_| err(format!("invalid similarity {s:?}")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(format!("similarity {v} outside [0, 1]")));
                }
                Ok(v)
            };
            out.insert(&a.trim().to_lowercase(), &b.trim().to_lowercase(), num(p)?, num(l)?)?;
        }
        Ok(out)
    }

    pub fn similarity(&self, a: &str, b: &str, measure: SimilarityMeasure) -> f64 {
        if a == b {
            return 1.0;
        }
        match self.table.get(&ordered(a, b)) {
            Some(&(p, l)) => match measure {
                SimilarityMeasure::PathLen => p,
                SimilarityMeasure::Lin => l,
            },
            None => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Entries in a stable order, for serialization.
    pub fn entries(&self) -> Vec<(String, String, f64, f64)> {
        let mut v: Vec<_> = self
            .table
            .iter()
            .map(|((a, b), &(p, l))| (a.clone(), b.clone(), p, l))
            .collect();
        v.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        v
    }
}

/// `ic(w) = ln(total / freq(w))`, with unseen tokens counted once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InformationContent {
    freq: BTreeMap<String, u64>,
    total: u64,
}

impl InformationContent {
    pub fn from_frequencies(freq: BTreeMap<String, u64>) -> Self {
        let total = freq.values().sum();
        InformationContent { freq, total }
    }

    /// Without counts every token weighs 1.
    pub fn ic(&self, token: &str) -> f64 {
        if self.total == 0 {
            return 1.0;
        }
        let f = self.freq.get(token).copied().unwrap_or(0).max(1);
        (self.total as f64 / f as f64).ln().max(0.0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequencies(&self) -> &BTreeMap<String, u64> {
        &self.freq
    }
}

/// Token → vector lookup used by the embedding-based features.
pub trait WordVectors {
    fn vector(&self, token: &str) -> &[f64];
}

/// Frozen copy of an embedding table together with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenEmbeddings {
    pub vocab: Vocabulary,
    pub matrix: Matrix<f64>,
}

impl WordVectors for FrozenEmbeddings {
    fn vector(&self, token: &str) -> &[f64] {
        self.matrix.row(self.vocab.lookup(token))
    }
}

impl<S: std::hash::BuildHasher> WordVectors for HashMap<String, Vec<f64>, S> {
    fn vector(&self, token: &str) -> &[f64] {
        self.get(token).map_or(&[], Vec::as_slice)
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Harmonic mean of `o/|S1|` and `o/|S2|` over distinct n-grams.
pub fn ngram_overlap(tokens1: &[String], tokens2: &[String], n: usize) -> f64 {
    assert!((1..=3).contains(&n), "n-gram order must be 1, 2 or 3");
    if tokens1.len() < n || tokens2.len() < n {
        return 0.0;
    }
    let s1: HashSet<&[String]> = tokens1.windows(n).collect();
    let s2: HashSet<&[String]> = tokens2.windows(n).collect();
    let o = s1.intersection(&s2).count() as f64;
    harmonic(o / s1.len() as f64, o / s2.len() as f64)
}

fn coverage(from: &[String], to: &[String], measure: SimilarityMeasure, provider: &WordSimilarityProvider) -> f64 {
    let total: f64 = from
        .iter()
        .map(|w| {
            to.iter()
                .map(|v| provider.similarity(w, v, measure))
                .fold(0.0, f64::max)
        })
        .sum();
    total / from.len() as f64
}

/// Harmonic mean of best-match coverage in both directions.
pub fn soft_overlap(
    tokens1: &[String],
    tokens2: &[String],
    measure: SimilarityMeasure,
    provider: &WordSimilarityProvider,
) -> f64 {
    if tokens1.is_empty() || tokens2.is_empty() {
        return 0.0;
    }
    harmonic(
        coverage(tokens1, tokens2, measure, provider),
        coverage(tokens2, tokens1, measure, provider),
    )
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (crate::numkit::norm(a), crate::numkit::norm(b));
    if na < NORM_FLOOR || nb < NORM_FLOOR {
        return 0.0;
    }
    crate::numkit::dot(a, b) / (na * nb)
}

fn weighted_sum(tokens: &[String], emb: &impl WordVectors, ic: &InformationContent) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    for t in tokens {
        let v = emb.vector(t);
        if acc.len() < v.len() {
            acc.resize(v.len(), 0.0);
        }
        let w = ic.ic(t);
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    acc
}

/// `max(0, cos(Σ ic(w)·emb(w), Σ ic(w')·emb(w')))`.
pub fn weighted_cosine(tokens1: &[String], tokens2: &[String], emb: &impl WordVectors, ic: &InformationContent) -> f64 {
    let v1 = weighted_sum(tokens1, emb, ic);
    let v2 = weighted_sum(tokens2, emb, ic);
    cosine(&v1, &v2).clamp(0.0, 1.0)
}

/// Similarity used for alignment: 1 for identical tokens, otherwise the
/// embedding cosine.
pub fn alignment_similarity(a: &str, b: &str, emb: &impl WordVectors) -> f64 {
    if a == b {
        1.0
    } else {
        cosine(emb.vector(a), emb.vector(b))
    }
}

/// Pairs `(i, j)` chosen by greedy alignment, in selection order.
pub fn greedy_alignment_pairs(
    tokens1: &[String],
    tokens2: &[String],
    emb: &impl WordVectors,
    threshold: f64,
) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, a) in tokens1.iter().enumerate() {
        for (j, b) in tokens2.iter().enumerate() {
            let s = alignment_similarity(a, b, emb);
            if s >= threshold {
                candidates.push((s, i, j));
            }
        }
    }
    // highest similarity first, ties by smaller (i, j)
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut used1 = vec![false; tokens1.len()];
    let mut used2 = vec![false; tokens2.len()];
    let mut out = Vec::new();
    for (_, i, j) in candidates {
        if !used1[i] && !used2[j] {
            used1[i] = true;
            used2[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// IC mass of aligned tokens over the IC mass of all tokens.
///
/// The two sentences are put in a canonical order first so the result does
/// not depend on argument order.
pub fn greedy_alignment(
    tokens1: &[String],
    tokens2: &[String],
    emb: &impl WordVectors,
    ic: &InformationContent,
    threshold: f64,
) -> f64 {
    let (a, b) = if tokens2 < tokens1 {
        (tokens2, tokens1)
    } else {
        (tokens1, tokens2)
    };
    let total: f64 = a.iter().chain(b).map(|t| ic.ic(t)).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let aligned: f64 = greedy_alignment_pairs(a, b, emb, threshold)
        .into_iter()
        .map(|(i, j)| ic.ic(&a[i]) + ic.ic(&b[j]))
        .sum();
    (aligned / total).clamp(0.0, 1.0)
}

pub fn length_ratio(tokens1: &[String], tokens2: &[String]) -> f64 {
    let (n1, n2) = (tokens1.len(), tokens2.len());
    if n1 == 0 || n2 == 0 {
        return 0.0;
    }
    n1.min(n2) as f64 / n1.max(n2) as f64
}

/// Frozen inputs for feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureResources {
    pub embeddings: FrozenEmbeddings,
    pub ic: InformationContent,
    pub similarities: WordSimilarityProvider,
}

impl FeatureResources {
    pub fn extract(&self, pair: &SentencePair) -> FeatureVector {
        extract(pair, &self.embeddings, &self.ic, &self.similarities)
    }
}

pub fn extract(
    pair: &SentencePair,
    emb: &impl WordVectors,
    ic: &InformationContent,
    provider: &WordSimilarityProvider,
) -> FeatureVector {
    let (a, b) = (&pair.tokens1, &pair.tokens2);
    FeatureVector([
        ngram_overlap(a, b, 1),
        ngram_overlap(a, b, 2),
        ngram_overlap(a, b, 3),
        soft_overlap(a, b, SimilarityMeasure::PathLen, provider),
        soft_overlap(a, b, SimilarityMeasure::Lin, provider),
        weighted_cosine(a, b, emb, ic),
        greedy_alignment(a, b, emb, ic, ALIGNMENT_THRESHOLD),
        length_ratio(a, b),
    ])
}
