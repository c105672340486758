//! Teacher-generated sentence-pair datasets for capacity and regression
//! experiments.
//!
//! A randomly initialized teacher model scores random sentence pairs; its
//! expected scores, min–max rescaled to `[0, 5]`, become the gold labels.

use std::collections::BTreeMap;

use crate::corpus::{EmbeddingOrigin, EmbeddingTable, SentencePair, Vocabulary};
use crate::error::Result;
use crate::features::{FeatureResources, FrozenEmbeddings, InformationContent, WordSimilarityProvider};
use crate::model::{Model, ModelDims};
use crate::numkit::{init_uniform, Matrix, Scalar, SeededRng};

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub pairs: usize,
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub dims: ModelDims,
    /// Uniform scale of the teacher's embedding table.
    pub embedding_scale: f64,
    /// Multiplier on the teacher scorer's output layer; larger values give
    /// sharper score distributions.
    pub teacher_gain: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(pairs: usize, dims: ModelDims, seed: u64) -> Self {
        SyntheticSpec {
            pairs,
            vocab_size: 40,
            min_len: 3,
            max_len: 7,
            dims,
            embedding_scale: 1.0,
            teacher_gain: 4.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub pairs: Vec<SentencePair>,
    pub vocab: Vocabulary,
    /// The teacher's embedding table (vocabulary order, UNK row included).
    pub teacher_embeddings: Matrix<f32>,
    pub resources: FeatureResources,
    pub teacher: Model<f64>,
}

impl SyntheticSuite {
    /// Embedding table for a student: the teacher's table (WI) or a seeded
    /// random one (RI).
    pub fn student_table<T: Scalar>(&self, origin: EmbeddingOrigin, rng: &mut SeededRng) -> EmbeddingTable<T> {
        match origin {
            EmbeddingOrigin::Pretrained => EmbeddingTable {
                matrix: self.teacher_embeddings.cast(),
                origin,
                pretrained_rows: self.vocab.len() - 1,
            },
            EmbeddingOrigin::Random => EmbeddingTable::random(&self.vocab, self.teacher_embeddings.cols(), rng),
        }
    }

    /// Word-vector file rows for the teacher's table, UNK excluded.
    pub fn embedding_rows(&self) -> Vec<(String, Vec<f32>)> {
        self.vocab
            .tokens()
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), self.teacher_embeddings.row(i + 1).to_vec()))
            .collect()
    }
}

fn word(i: usize) -> String {
    format!("w{i}")
}

fn sentence(spec: &SyntheticSpec, rng: &mut SeededRng) -> Vec<String> {
    let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    (0..len).map(|_| word(rng.below(spec.vocab_size))).collect()
}

/// Second sentence: a noisy edit of the first so overlaps vary across pairs.
fn variant(first: &[String], spec: &SyntheticSpec, rng: &mut SeededRng) -> Vec<String> {
    let keep = rng.next_f64();
    let mut out: Vec<String> = first
        .iter()
        .map(|t| {
            if rng.next_f64() < keep {
                t.clone()
            } else {
                word(rng.below(spec.vocab_size))
            }
        })
        .collect();
    if rng.next_f64() < 0.3 && out.len() > 1 {
        let i = rng.below(out.len() - 1);
        out.swap(i, i + 1);
    }
    if rng.next_f64() < 0.3 && out.len() < spec.max_len {
        out.push(word(rng.below(spec.vocab_size)));
    }
    out
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticSuite> {
    let mut rng = SeededRng::new(spec.seed);
    let mut token_pairs = Vec::with_capacity(spec.pairs);
    for _ in 0..spec.pairs {
        let a = sentence(spec, &mut rng);
        let b = variant(&a, spec, &mut rng);
        token_pairs.push((a, b));
    }

    let vocab = Vocabulary::from_tokens((0..spec.vocab_size).map(word));
    let table: Matrix<f32> = init_uniform(vocab.len(), spec.dims.embedding_dim, spec.embedding_scale, &mut rng);

    // Zipf-like counts: lower word ids are more frequent.
    let freq: BTreeMap<String, u64> = (0..spec.vocab_size)
        .map(|i| (word(i), (1000 / (i + 1)) as u64 + 1))
        .collect();
    let mut sims = WordSimilarityProvider::new();
    for i in 0..spec.vocab_size / 2 {
        let s = rng.uniform(0.2, 0.9);
        sims.insert(&word(2 * i), &word(2 * i + 1), s, s * 0.8)?;
    }
    let resources = FeatureResources {
        embeddings: FrozenEmbeddings {
            vocab: vocab.clone(),
            matrix: table.cast(),
        },
        ic: InformationContent::from_frequencies(freq),
        similarities: sims,
    };

    let teacher_table = EmbeddingTable {
        matrix: table.cast::<f64>(),
        origin: EmbeddingOrigin::Pretrained,
        pretrained_rows: vocab.len() - 1,
    };
    let mut teacher = Model::new(
        spec.dims,
        vocab.clone(),
        teacher_table,
        resources.clone(),
        &mut rng.fork(1),
    )?;
    for x in teacher.params.network.scorer.v.data_mut() {
        *x *= spec.teacher_gain;
    }

    let unlabeled: Vec<SentencePair> = token_pairs
        .into_iter()
        .enumerate()
        .map(|(i, (tokens1, tokens2))| SentencePair {
            id: format!("syn{i}"),
            tokens1,
            tokens2,
            gold: None,
        })
        .collect();
    let prepared = teacher.prepare(&unlabeled);
    let scores: Vec<f64> = teacher.predict_all(&prepared)?.into_iter().map(|d| d.y).collect();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let pairs = unlabeled
        .into_iter()
        .zip(scores)
        .map(|(mut p, y)| {
            p.gold = Some((5.0 * (y - lo) / span).clamp(0.0, 5.0));
            p
        })
        .collect();

    Ok(SyntheticSuite {
        pairs,
        vocab,
        teacher_embeddings: table,
        resources,
        teacher,
    })
}
