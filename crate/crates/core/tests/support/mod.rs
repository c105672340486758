//! Shared fixtures and independent reference implementations for the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use stsim::corpus::{EmbeddingOrigin, SentencePair, Vocabulary};
use stsim::features::{FeatureResources, FrozenEmbeddings, InformationContent, WordSimilarityProvider};
use stsim::model::{Model, ModelDims};
use stsim::numkit::{Matrix, SeededRng};
use stsim::synthetic::SyntheticSuite;
use stsim::trainer::TrainConfig;

/// The six score distributions of the worked loss example, group A then
/// group B. Group A's third column uses P(S=3) = 0.05 so it sums to one.
pub const WORKED_PROBS: [[f64; 6]; 6] = [
    [0.05, 0.05, 0.15, 0.5, 0.15, 0.1],
    [0.05, 0.05, 0.1, 0.35, 0.4, 0.05],
    [0.05, 0.05, 0.05, 0.05, 0.1, 0.7],
    [0.15, 0.3, 0.25, 0.1, 0.1, 0.1],
    [0.05, 0.2, 0.3, 0.25, 0.1, 0.1],
    [0.1, 0.1, 0.2, 0.3, 0.2, 0.1],
];
pub const WORKED_GOLDS: [f64; 3] = [3.0, 4.0, 5.0];
pub const WORKED_EXPECTED: [f64; 6] = [2.95, 3.15, 4.2, 2.0, 2.45, 2.7];
pub const WORKED_MSE: [f64; 2] = [0.455, 2.90];
pub const WORKED_KLD: [f64; 2] = [1.966, 6.91];
pub const WORKED_PCC: [f64; 2] = [0.931, 0.987];

/// Textbook two-pass Pearson correlation.
pub fn reference_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

pub fn reference_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Alignment by exhaustive search: among every matching built from edges at
/// or above the threshold, pick the one whose edges, listed best first
/// (similarity descending, then (i, j) ascending), form the
/// lexicographically greatest sequence.
pub fn exhaustive_alignment(
    tokens1: &[String],
    tokens2: &[String],
    vector: &dyn Fn(&str) -> Vec<f64>,
    threshold: f64,
) -> Vec<(usize, usize)> {
    let sim = |i: usize, j: usize| {
        if tokens1[i] == tokens2[j] {
            1.0
        } else {
            reference_cosine(&vector(&tokens1[i]), &vector(&tokens2[j]))
        }
    };
    let mut all = Vec::new();
    let mut current = Vec::new();
    enumerate_matchings(
        0,
        tokens1.len(),
        tokens2.len(),
        &mut vec![false; tokens2.len()],
        &mut current,
        &mut all,
    );

    let key = |m: &Vec<(usize, usize)>| {
        let mut edges: Vec<(f64, usize, usize)> = m.iter().map(|&(i, j)| (sim(i, j), i, j)).collect();
        edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        edges
    };
    let better = |a: &[(f64, usize, usize)], b: &[(f64, usize, usize)]| -> bool {
        for (x, y) in a.iter().zip(b) {
            if x.0 != y.0 {
                return x.0 > y.0;
            }
            if (x.1, x.2) != (y.1, y.2) {
                return (x.1, x.2) < (y.1, y.2);
            }
        }
        a.len() > b.len()
    };

    let mut best: Vec<(f64, usize, usize)> = Vec::new();
    for m in all {
        if m.iter().any(|&(i, j)| sim(i, j) < threshold) {
            continue;
        }
        let k = key(&m);
        if better(&k, &best) {
            best = k;
        }
    }
    best.into_iter().map(|(_, i, j)| (i, j)).collect()
}

fn enumerate_matchings(
    i: usize,
    n1: usize,
    n2: usize,
    used: &mut Vec<bool>,
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if i == n1 {
        out.push(current.clone());
        return;
    }
    enumerate_matchings(i + 1, n1, n2, used, current, out);
    for j in 0..n2 {
        if !used[j] {
            used[j] = true;
            current.push((i, j));
            enumerate_matchings(i + 1, n1, n2, used, current, out);
            current.pop();
            used[j] = false;
        }
    }
}

/// Random feature resources over a small vocabulary `t0..t{n-1}`. Some
/// tokens share a vector so exact similarity ties occur.
pub fn random_resources(rng: &mut SeededRng, vocab_size: usize, dim: usize) -> FeatureResources {
    let vocab = Vocabulary::from_tokens((0..vocab_size).map(|i| format!("t{i}")));
    let mut matrix = Matrix::<f64>::zeros(vocab.len(), dim);
    for r in 0..vocab.len() {
        for c in 0..dim {
            matrix.row_mut(r)[c] = rng.uniform(-1.0, 1.0);
        }
    }
    // t1 duplicates t0's vector
    if vocab_size >= 2 {
        let row = matrix.row(1).to_vec();
        matrix.row_mut(2).copy_from_slice(&row);
    }
    let mut freq = BTreeMap::new();
    for i in 0..vocab_size {
        if rng.next_f64() < 0.8 {
            freq.insert(format!("t{i}"), 1 + rng.below(500) as u64);
        }
    }
    let mut sims = WordSimilarityProvider::new();
    for _ in 0..vocab_size {
        let (a, b) = (rng.below(vocab_size), rng.below(vocab_size));
        let p = rng.next_f64();
        sims.insert(&format!("t{a}"), &format!("t{b}"), p, p * rng.next_f64())
            .unwrap();
    }
    FeatureResources {
        embeddings: FrozenEmbeddings { vocab, matrix },
        ic: InformationContent::from_frequencies(freq),
        similarities: sims,
    }
}

/// A random sentence of `1..=max_len` tokens; ids at or above
/// `vocab_size` are out of vocabulary.
pub fn random_sentence(rng: &mut SeededRng, vocab_size: usize, max_len: usize) -> Vec<String> {
    let len = 1 + rng.below(max_len);
    (0..len).map(|_| format!("t{}", rng.below(vocab_size + 2))).collect()
}

pub fn random_pair(rng: &mut SeededRng, vocab_size: usize, max_len: usize) -> SentencePair {
    SentencePair {
        id: "r".into(),
        tokens1: random_sentence(rng, vocab_size, max_len),
        tokens2: random_sentence(rng, vocab_size, max_len),
        gold: None,
    }
}

/// Small-model configuration used by the training tests.
pub fn small_config(loss: stsim::objective::LossKind, seed: u64) -> TrainConfig {
    TrainConfig {
        loss,
        batch_size: 10,
        epochs: 10,
        learning_rate: 5e-3,
        lr_halve_every: 5,
        dims: ModelDims::new(8, 16),
        seed,
        init: EmbeddingOrigin::Random,
    }
}

/// Student model over a synthetic suite with the requested embedding init.
pub fn student(suite: &SyntheticSuite, config: &TrainConfig, origin: EmbeddingOrigin) -> Model<f32> {
    let table = suite.student_table::<f32>(origin, &mut config.init_rng().fork(3));
    Model::new(
        config.dims,
        suite.vocab.clone(),
        table,
        suite.resources.clone(),
        &mut config.init_rng(),
    )
    .unwrap()
}
