//! Mini-batch training with Adam and a step-halving learning rate.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    batch_indices, load_embeddings, load_frequencies, EmbeddingFormat, EmbeddingOrigin, EmbeddingTable, SentencePair,
    Vocabulary,
};
use crate::error::{Error, Result};
use crate::features::{FeatureResources, FrozenEmbeddings, InformationContent, WordSimilarityProvider};
use crate::model::{Model, ModelDims, Optimizer, PreparedPair};
use crate::numkit::{Scalar, SeededRng};
use crate::objective::{pearson, LossKind};
use crate::params::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// The rate halves after every this many completed epochs.
    pub lr_halve_every: usize,
    pub dims: ModelDims,
    pub seed: u64,
    pub init: EmbeddingOrigin,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Pcc,
            batch_size: 125,
            epochs: 15,
            learning_rate: 1e-4,
            lr_halve_every: 5,
            dims: ModelDims::new(300, 200),
            seed: 0,
            init: EmbeddingOrigin::Pretrained,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.lr_halve_every == 0 {
            return Err(Error::Config("lr halving period must be positive".into()));
        }
        self.dims.validate()
    }

    /// Rate used during `epoch` (1-based).
    pub fn lr_for_epoch(&self, epoch: usize) -> f64 {
        let halvings = epoch.saturating_sub(1) / self.lr_halve_every;
        self.learning_rate * 0.5f64.powi(halvings as i32)
    }

    /// Seed stream for parameter initialization.
    pub fn init_rng(&self) -> SeededRng {
        SeededRng::new(self.seed).fork(1)
    }

    fn shuffle_rng(&self) -> SeededRng {
        SeededRng::new(self.seed).fork(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_pcc: f64,
    pub val_pcc: f64,
    pub seconds: f64,
    pub lr: f64,
}

impl EpochReport {
    pub const TSV_HEADER: &'static str = "epoch\tmean_loss\ttrain_pcc\tval_pcc\tseconds\tlr";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}\t{:e}",
            self.epoch, self.mean_loss, self.train_pcc, self.val_pcc, self.seconds, self.lr
        )
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &EpochReport) -> bool {
        self.epoch == other.epoch
            && self.mean_loss.to_bits() == other.mean_loss.to_bits()
            && self.train_pcc.to_bits() == other.train_pcc.to_bits()
            && self.val_pcc.to_bits() == other.val_pcc.to_bits()
            && self.lr.to_bits() == other.lr.to_bits()
    }
}

/// Word vectors and feature tables a training run starts from.
#[derive(Debug, Clone)]
pub struct Resources<T> {
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingTable<T>,
    pub features: FeatureResources,
}

impl<T: Scalar> Resources<T> {
    /// Builds the vocabulary from `pairs` and loads vectors, frequencies and
    /// (optionally) word similarities from disk. The feature extractor gets a
    /// frozen copy of the loaded table.
    pub fn load(
        pairs: &[SentencePair],
        embeddings: &Path,
        format: EmbeddingFormat,
        frequencies: &Path,
        similarities: Option<&Path>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let vocab = Vocabulary::build(pairs);
        let table: EmbeddingTable<T> = load_embeddings(embeddings, format, &vocab, rng)?;
        let similarities = match similarities {
            Some(path) => WordSimilarityProvider::load(path)?,
            None => WordSimilarityProvider::new(),
        };
        let features = FeatureResources {
            embeddings: FrozenEmbeddings {
                vocab: vocab.clone(),
                matrix: table.matrix.cast(),
            },
            ic: InformationContent::from_frequencies(load_frequencies(frequencies)?),
            similarities,
        };
        Ok(Resources {
            vocab,
            embeddings: table,
            features,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub final_model: Model<T>,
    /// Snapshot with the highest validation correlation (the initial model
    /// when no epoch ran).
    pub best_model: Model<T>,
    pub best_epoch: usize,
    pub reports: Vec<EpochReport>,
}

/// Pearson correlation of the model's scores with gold scores.
pub fn correlation<T: Scalar>(model: &Model<T>, pairs: &[PreparedPair]) -> Result<(f64, Vec<f64>)> {
    let golds = pairs
        .iter()
        .map(|p| {
            p.gold
                .ok_or_else(|| Error::Contract(format!("pair {} is unlabeled; use `score` for unlabeled data", p.id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    if pairs.len() < 2 {
        return Err(Error::Contract("correlation needs at least two labeled pairs".into()));
    }
    let scores: Vec<f64> = model.predict_all(pairs)?.into_iter().map(|d| d.y.as_f64()).collect();
    Ok((pearson(&scores, &golds)?, scores))
}

pub fn train<T: Scalar>(
    config: &TrainConfig,
    train_pairs: &[SentencePair],
    val_pairs: &[SentencePair],
    resources: Resources<T>,
) -> Result<TrainOutcome<T>> {
    train_observed(config, train_pairs, val_pairs, resources, &mut |_| {})
}

/// [`train`], calling `on_epoch` after every epoch.
pub fn train_observed<T: Scalar>(
    config: &TrainConfig,
    train_pairs: &[SentencePair],
    val_pairs: &[SentencePair],
    resources: Resources<T>,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let mut embeddings = resources.embeddings;
    if config.init == EmbeddingOrigin::Random && embeddings.origin != EmbeddingOrigin::Random {
        embeddings = EmbeddingTable::random(
            &resources.vocab,
            config.dims.embedding_dim,
            &mut config.init_rng().fork(3),
        );
    }
    let model = Model::new(
        config.dims,
        resources.vocab,
        embeddings,
        resources.features,
        &mut config.init_rng(),
    )?;
    train_model_observed(config, model, train_pairs, val_pairs, on_epoch)
}

/// Trains an already initialized model.
pub fn train_model<T: Scalar>(
    config: &TrainConfig,
    model: Model<T>,
    train_pairs: &[SentencePair],
    val_pairs: &[SentencePair],
) -> Result<TrainOutcome<T>> {
    train_model_observed(config, model, train_pairs, val_pairs, &mut |_| {})
}

pub fn train_model_observed<T: Scalar>(
    config: &TrainConfig,
    mut model: Model<T>,
    train_pairs: &[SentencePair],
    val_pairs: &[SentencePair],
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_pairs.len() < 2 || val_pairs.len() < 2 {
        return Err(Error::Contract(
            "training and validation sets need at least two pairs each".into(),
        ));
    }
    let train = model.prepare(train_pairs);
    let val = model.prepare(val_pairs);
    for p in train.iter().chain(&val) {
        if p.gold.is_none() {
            return Err(Error::Contract(format!("pair {} has no gold score", p.id)));
        }
    }

    let mut optimizer = Optimizer::new(&model.params);
    let mut shuffle = config.shuffle_rng();
    let mut reports = Vec::with_capacity(config.epochs);
    let mut best_model = model.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::NEG_INFINITY;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let lr = config.lr_for_epoch(epoch);
        let mut losses = Vec::new();
        for batch in batch_indices(train.len(), config.batch_size, &mut shuffle)? {
            if batch.len() < config.loss.min_batch() {
                continue;
            }
            let refs: Vec<&PreparedPair> = batch.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = model.batch_gradient(&refs, &config.loss)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("epoch {epoch}: {} loss is {loss}", config.loss)));
            }
            if let Some(name) = grads.first_non_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}: gradient of {name} is not finite"
                )));
            }
            optimizer.step(&mut model.params, &grads, lr)?;
            if let Some(name) = model.params.first_non_finite() {
                return Err(Error::Numeric(format!("epoch {epoch}: parameter {name} is not finite")));
            }
            losses.push(loss.as_f64());
        }
        let mean_loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        let (train_pcc, _) = correlation(&model, &train)?;
        let (val_pcc, _) = correlation(&model, &val)?;
        if val_pcc > best_val {
            best_val = val_pcc;
            best_epoch = epoch;
            best_model = model.clone();
        }
        let report = EpochReport {
            epoch,
            mean_loss,
            train_pcc,
            val_pcc,
            seconds: started.elapsed().as_secs_f64(),
            lr,
        };
        on_epoch(&report);
        reports.push(report);
    }
    Ok(TrainOutcome {
        final_model: model,
        best_model,
        best_epoch,
        reports,
    })
}
