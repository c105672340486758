//! The full network: embeddings → encoder (×2) → scorer, with batched
//! forward and backward passes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingOrigin, EmbeddingTable, SentencePair, Vocabulary};
use crate::encoder::{Encoder, EncoderTape};
use crate::error::{Error, Result};
use crate::features::{FeatureResources, FEATURE_COUNT};
use crate::numkit::{adam_step, AdamState, Matrix, Scalar, SeededRng};
use crate::objective::{Batch, LossKind, ScoreDistribution, ScorerParams, ScorerTape, CLASSES};
use crate::params::{prefixed, Parameters};

/// Network gradients of one chunk plus `(token id, gradient)` rows for the
/// embedding table.
type ChunkGradients<T> = (Network<T>, Vec<(usize, Vec<T>)>);

/// Pairs per gradient-accumulation chunk. Fixed so results do not depend on
/// the thread count.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub attention: usize,
    pub mlp_hidden: usize,
    /// One encoder shared by both sentences when true.
    pub tied: bool,
}

impl ModelDims {
    pub fn new(embedding_dim: usize, hidden: usize) -> Self {
        ModelDims {
            embedding_dim,
            hidden,
            attention: hidden,
            mlp_hidden: hidden,
            tied: true,
        }
    }

    /// Scorer input width `4H + F`.
    pub fn scorer_input(&self) -> usize {
        4 * self.hidden + FEATURE_COUNT
    }

    pub fn validate(&self) -> Result<()> {
        let d = self;
        if d.embedding_dim == 0 || d.hidden == 0 || d.attention == 0 || d.mlp_hidden == 0 {
            return Err(Error::Config(format!("all model dimensions must be positive: {d:?}")));
        }
        Ok(())
    }
}

/// Everything trained by gradient descent except the embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub encoders: Vec<Encoder<T>>,
    pub scorer: ScorerParams<T>,
}

impl<T: Scalar> Network<T> {
    fn zeros(dims: &ModelDims) -> Self {
        let n_enc = if dims.tied { 1 } else { 2 };
        Network {
            encoders: (0..n_enc)
                .map(|_| Encoder::zeros(dims.embedding_dim, dims.hidden, dims.attention))
                .collect(),
            scorer: ScorerParams::zeros(dims.scorer_input(), dims.mlp_hidden),
        }
    }

    fn random(dims: &ModelDims, rng: &mut SeededRng) -> Self {
        let n_enc = if dims.tied { 1 } else { 2 };
        Network {
            encoders: (0..n_enc)
                .map(|_| Encoder::random(dims.embedding_dim, dims.hidden, dims.attention, rng))
                .collect(),
            scorer: ScorerParams::random(dims.scorer_input(), dims.mlp_hidden, rng),
        }
    }

    fn encoder_for(&self, sentence: usize) -> &Encoder<T> {
        &self.encoders[sentence.min(self.encoders.len() - 1)]
    }

    fn add(&mut self, other: &Network<T>) {
        for ((_, a), (_, b)) in self.params_mut().into_iter().zip(other.params()) {
            a.add_assign(b).expect("identical layouts");
        }
    }
}

impl<T: Scalar> Parameters<T> for Network<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::new();
        for (i, e) in self.encoders.iter().enumerate() {
            out.extend(prefixed(&format!("enc{i}"), e.params()));
        }
        out.extend(prefixed("scorer", self.scorer.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = Vec::new();
        for (i, e) in self.encoders.iter_mut().enumerate() {
            out.extend(prefixed(&format!("enc{i}"), e.params_mut()));
        }
        out.extend(prefixed("scorer", self.scorer.params_mut()));
        out
    }
}

/// All trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub embeddings: Matrix<T>,
    pub network: Network<T>,
}

pub type GradientTape<T> = ModelParams<T>;

impl<T: Scalar> ModelParams<T> {
    /// All-zero parameters for a vocabulary of `vocab_len` rows.
    pub fn zeros(dims: &ModelDims, vocab_len: usize) -> Self {
        ModelParams {
            embeddings: Matrix::zeros(vocab_len, dims.embedding_dim),
            network: Network::zeros(dims),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams {
            embeddings: self.embeddings.cast(),
            network: Network {
                encoders: self
                    .network
                    .encoders
                    .iter()
                    .map(|e| Encoder::zeros(e.input_dim(), e.hidden(), e.attention.width()))
                    .collect(),
                scorer: ScorerParams::zeros(self.network.scorer.input_dim(), self.network.scorer.hidden()),
            },
        };
        for ((_, dst), (_, src)) in out.params_mut().into_iter().zip(self.params()) {
            *dst = src.cast();
        }
        out
    }
}

impl<T: Scalar> Parameters<T> for ModelParams<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = vec![("embeddings".to_string(), &self.embeddings)];
        out.extend(self.network.params());
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = vec![("embeddings".to_string(), &mut self.embeddings)];
        out.extend(self.network.params_mut());
        out
    }
}

/// A pair resolved to vocabulary indices with its features computed.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPair {
    pub id: String,
    pub ids1: Vec<usize>,
    pub ids2: Vec<usize>,
    pub features: [f64; FEATURE_COUNT],
    pub gold: Option<f64>,
}

/// Forward activations for one pair.
#[derive(Debug, Clone)]
pub struct PairTape<T> {
    pub sentences: [EncoderTape<T>; 2],
    pub scorer: ScorerTape<T>,
}

impl<T> PairTape<T> {
    pub fn distribution(&self) -> &ScoreDistribution<T> {
        &self.scorer.dist
    }
}

/// A loss over a batch of score distributions.
pub trait Objective<T: Scalar>: Sync {
    fn loss(&self, batch: &Batch<T>) -> Result<T>;

    /// `∂L/∂pⁿ` per sample.
    fn gradient(&self, batch: &Batch<T>) -> Result<Vec<[T; CLASSES]>>;
}

impl<T: Scalar> Objective<T> for LossKind {
    fn loss(&self, batch: &Batch<T>) -> Result<T> {
        crate::objective::batch_loss(*self, batch)
    }

    fn gradient(&self, batch: &Batch<T>) -> Result<Vec<[T; CLASSES]>> {
        crate::objective::batch_loss_gradient(*self, batch)
    }
}

/// Vocabulary, trainable parameters and frozen feature resources.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub dims: ModelDims,
    pub vocab: Vocabulary,
    pub origin: EmbeddingOrigin,
    pub params: ModelParams<T>,
    pub features: FeatureResources,
}

impl<T: Scalar> Model<T> {
    /// Random encoder and scorer weights around the given embedding table.
    pub fn new(
        dims: ModelDims,
        vocab: Vocabulary,
        embeddings: EmbeddingTable<T>,
        features: FeatureResources,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        dims.validate()?;
        if embeddings.rows() != vocab.len() || embeddings.dim() != dims.embedding_dim {
            return Err(Error::Shape {
                op: "model_new",
                left: (vocab.len(), dims.embedding_dim),
                right: embeddings.matrix.shape(),
            });
        }
        Ok(Model {
            dims,
            vocab,
            origin: embeddings.origin,
            params: ModelParams {
                embeddings: embeddings.matrix,
                network: Network::random(&dims, rng),
            },
            features,
        })
    }

    pub fn zero_network(&mut self) {
        self.params.network = Network::zeros(&self.dims);
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            dims: self.dims,
            vocab: self.vocab.clone(),
            origin: self.origin,
            params: self.params.cast(),
            features: self.features.clone(),
        }
    }

    pub fn prepare_pair(&self, pair: &SentencePair) -> PreparedPair {
        PreparedPair {
            id: pair.id.clone(),
            ids1: self.vocab.lookup_all(&pair.tokens1),
            ids2: self.vocab.lookup_all(&pair.tokens2),
            features: self.features.extract(pair).0,
            gold: pair.gold,
        }
    }

    pub fn prepare(&self, pairs: &[SentencePair]) -> Vec<PreparedPair> {
        pairs.par_iter().map(|p| self.prepare_pair(p)).collect()
    }

    fn words(&self, ids: &[usize]) -> Vec<&[T]> {
        ids.iter().map(|&i| self.params.embeddings.row(i)).collect()
    }

    pub fn forward(&self, pair: &PreparedPair) -> Result<PairTape<T>> {
        if pair
            .ids1
            .iter()
            .chain(&pair.ids2)
            .any(|&i| i >= self.params.embeddings.rows())
        {
            return Err(Error::Contract(format!(
                "pair {} uses indices beyond the vocabulary",
                pair.id
            )));
        }
        let net = &self.params.network;
        let t1 = net.encoder_for(0).encode(&self.words(&pair.ids1))?;
        let t2 = net.encoder_for(1).encode(&self.words(&pair.ids2))?;
        let m: Vec<T> = pair.features.iter().map(|&x| T::lit(x)).collect();
        let scorer = net.scorer.score(&t1.embedding.u, &t2.embedding.u, &m)?;
        Ok(PairTape {
            sentences: [t1, t2],
            scorer,
        })
    }

    pub fn predict(&self, pair: &PreparedPair) -> Result<ScoreDistribution<T>> {
        self.forward(pair).map(|t| t.scorer.dist)
    }

    pub fn predict_all(&self, pairs: &[PreparedPair]) -> Result<Vec<ScoreDistribution<T>>> {
        pairs.par_iter().map(|p| self.predict(p)).collect()
    }

    /// Reverse pass for one pair. Network gradients go into `grads`; word
    /// gradients come back as `(row, gradient)` entries.
    pub fn backward_pair(
        &self,
        pair: &PreparedPair,
        tape: &PairTape<T>,
        dp: &[T; CLASSES],
        grads: &mut Network<T>,
    ) -> Result<Vec<(usize, Vec<T>)>> {
        let net = &self.params.network;
        let d_input = net.scorer.backward_into(&tape.scorer, dp, &mut grads.scorer)?;
        let width = 2 * self.dims.hidden;
        let mut word_grads = Vec::with_capacity(pair.ids1.len() + pair.ids2.len());
        for (s, ids) in [&pair.ids1, &pair.ids2].into_iter().enumerate() {
            let du = &d_input[s * width..(s + 1) * width];
            let enc_idx = s.min(net.encoders.len() - 1);
            let dw = net.encoders[enc_idx].backward_into(&tape.sentences[s], du, &mut grads.encoders[enc_idx])?;
            if dw.len() != ids.len() {
                return Err(Error::Contract("tape length does not match the pair".into()));
            }
            word_grads.extend(ids.iter().copied().zip(dw));
        }
        Ok(word_grads)
    }

    /// Loss of the batch under the current parameters.
    pub fn batch_loss(&self, pairs: &[&PreparedPair], objective: &dyn Objective<T>) -> Result<T> {
        let preds: Result<Vec<_>> = pairs.par_iter().map(|p| self.predict(p)).collect();
        objective.loss(&self.batch(preds?, pairs)?)
    }

    fn batch(&self, preds: Vec<ScoreDistribution<T>>, pairs: &[&PreparedPair]) -> Result<Batch<T>> {
        let golds = pairs
            .iter()
            .map(|p| {
                p.gold
                    .map(T::lit)
                    .ok_or_else(|| Error::Contract(format!("pair {} has no gold score", p.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Batch::new(preds, golds)
    }

    /// Loss and full gradient for a batch.
    pub fn batch_gradient(
        &self,
        pairs: &[&PreparedPair],
        objective: &dyn Objective<T>,
    ) -> Result<(T, GradientTape<T>)> {
        let tapes: Result<Vec<PairTape<T>>> = pairs.par_iter().map(|p| self.forward(p)).collect();
        let tapes = tapes?;
        let batch = self.batch(tapes.iter().map(|t| t.scorer.dist.clone()).collect(), pairs)?;
        let loss = objective.loss(&batch)?;
        let dps = objective.gradient(&batch)?;

        let chunks: Result<Vec<ChunkGradients<T>>> = (0..pairs.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|idx| {
                let mut acc = Network::zeros(&self.dims);
                let mut words = Vec::new();
                for &i in idx {
                    words.extend(self.backward_pair(pairs[i], &tapes[i], &dps[i], &mut acc)?);
                }
                Ok((acc, words))
            })
            .collect();

        let mut grads = ModelParams {
            embeddings: Matrix::zeros(self.params.embeddings.rows(), self.params.embeddings.cols()),
            network: Network::zeros(&self.dims),
        };
        for (net, words) in chunks? {
            grads.network.add(&net);
            for (row, g) in words {
                for (dst, src) in grads.embeddings.row_mut(row).iter_mut().zip(g) {
                    *dst += src;
                }
            }
        }
        Ok((loss, grads))
    }
}

/// Adam state for every tensor of a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    states: Vec<AdamState<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        Optimizer {
            states: params
                .params()
                .into_iter()
                .map(|(_, m)| AdamState::for_param(m))
                .collect(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>, lr: f64) -> Result<()> {
        let pairs = params.params_mut().into_iter().zip(grads.params());
        for (((_, p), (_, g)), st) in pairs.zip(self.states.iter_mut()) {
            adam_step(p, g, st, lr)?;
        }
        Ok(())
    }
}
