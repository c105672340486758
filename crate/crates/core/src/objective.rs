//! Scoring head, the four training objectives and Pearson correlation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::gru::add_into;
use crate::error::{Error, Result};
use crate::numkit::{init_uniform, softmax, softmax_backward, Matrix, Scalar, SeededRng};
use crate::params::Parameters;

/// Number of score classes, `S ∈ {0, …, 5}`.
pub const CLASSES: usize = 6;
pub const MAX_SCORE: f64 = 5.0;

/// Guard on each standard-deviation factor of the correlation.
pub const PCC_STD_FLOOR: f64 = 1e-8;

/// One-hidden-layer MLP over `[u1; u2; m]` ending in a 6-way softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams<T> {
    pub u: Matrix<T>,
    pub bu: Matrix<T>,
    pub v: Matrix<T>,
    pub bv: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDistribution<T> {
    pub p: [T; CLASSES],
    /// Expected score `vᵀp` with `v = [0, 1, 2, 3, 4, 5]`.
    pub y: T,
}

impl<T: Scalar> ScoreDistribution<T> {
    pub fn from_probs(p: [T; CLASSES]) -> Self {
        ScoreDistribution {
            y: expected_score(&p),
            p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScorerTape<T> {
    input: Vec<T>,
    hidden: Vec<T>,
    pub dist: ScoreDistribution<T>,
}

pub fn expected_score<T: Scalar>(p: &[T]) -> T {
    p.iter().enumerate().map(|(i, &pi)| T::lit(i as f64) * pi).sum()
}

impl<T: Scalar> ScorerParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        ScorerParams {
            u: Matrix::zeros(hidden, input),
            bu: Matrix::zeros(hidden, 1),
            v: Matrix::zeros(CLASSES, hidden),
            bv: Matrix::zeros(CLASSES, 1),
        }
    }

    pub fn random(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(input, hidden);
        p.u = init_uniform(hidden, input, 1.0 / (input as f64).sqrt(), rng);
        p.v = init_uniform(CLASSES, hidden, 1.0 / (hidden as f64).sqrt(), rng);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.u.cols()
    }

    pub fn hidden(&self) -> usize {
        self.u.rows()
    }

    /// `p = softmax(V·tanh(U·[u1; u2; m] + bU) + bV)`, `y = vᵀp`.
    pub fn score(&self, u1: &[T], u2: &[T], m: &[T]) -> Result<ScorerTape<T>> {
        let width = u1.len() + u2.len() + m.len();
        if width != self.input_dim() || u1.len() != u2.len() {
            return Err(Error::Shape {
                op: "score_pair",
                left: self.u.shape(),
                right: (width, 1),
            });
        }
        let input: Vec<T> = u1.iter().chain(u2).chain(m).copied().collect();
        let mut hidden = self.bu.data().to_vec();
        self.u.add_mul_vec(&input, &mut hidden);
        hidden.iter_mut().for_each(|x| *x = x.tanh());
        let mut logits = self.bv.data().to_vec();
        self.v.add_mul_vec(&hidden, &mut logits);
        let probs = softmax(&logits);
        let mut p = [T::zero(); CLASSES];
        p.copy_from_slice(&probs);
        Ok(ScorerTape {
            input,
            hidden,
            dist: ScoreDistribution::from_probs(p),
        })
    }

    /// Accumulates parameter gradients given `dL/dp`; returns `dL/d[u1; u2; m]`.
    pub fn backward_into(&self, tape: &ScorerTape<T>, dp: &[T], grads: &mut ScorerParams<T>) -> Result<Vec<T>> {
        if dp.len() != CLASSES || tape.input.len() != self.input_dim() || tape.hidden.len() != self.hidden() {
            return Err(Error::Contract("scorer tape does not match these parameters".into()));
        }
        let dlogits = softmax_backward(&tape.dist.p, dp);
        grads.v.add_outer(&dlogits, &tape.hidden);
        add_into(grads.bv.data_mut(), &dlogits);
        let mut dh = vec![T::zero(); self.hidden()];
        self.v.add_tmul_vec(&dlogits, &mut dh);
        for (g, &h) in dh.iter_mut().zip(&tape.hidden) {
            *g *= T::one() - h * h;
        }
        grads.u.add_outer(&dh, &tape.input);
        add_into(grads.bu.data_mut(), &dh);
        let mut dinput = vec![T::zero(); self.input_dim()];
        self.u.add_tmul_vec(&dh, &mut dinput);
        Ok(dinput)
    }
}

impl<T: Scalar> Parameters<T> for ScorerParams<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        vec![
            ("u".into(), &self.u),
            ("bu".into(), &self.bu),
            ("v".into(), &self.v),
            ("bv".into(), &self.bv),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        vec![
            ("u".into(), &mut self.u),
            ("bu".into(), &mut self.bu),
            ("v".into(), &mut self.v),
            ("bv".into(), &mut self.bv),
        ]
    }
}

fn check_gold(g: f64) -> Result<()> {
    if (0.0..=MAX_SCORE).contains(&g) {
        Ok(())
    } else {
        Err(Error::Range(g))
    }
}

/// Two-point target distribution over `⌊ŷ⌋` and `⌊ŷ⌋+1` whose mean is `ŷ`.
pub fn gold_distribution<T: Scalar>(gold: T) -> Result<[T; CLASSES]> {
    check_gold(gold.as_f64())?;
    let mut p = [T::zero(); CLASSES];
    let lo = gold.floor();
    let k = lo.as_f64() as usize;
    if gold == lo {
        p[k] = T::one();
    } else {
        p[k + 1] = gold - lo;
        p[k] = lo + T::one() - gold;
    }
    Ok(p)
}

/// Target class for NLL: nearest integer, halves rounded up.
pub fn nll_class<T: Scalar>(gold: T) -> Result<usize> {
    check_gold(gold.as_f64())?;
    Ok(gold.round().as_f64() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Nll,
    Mse,
    Kld,
    Pcc,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Nll, LossKind::Mse, LossKind::Kld, LossKind::Pcc];

    pub fn min_batch(self) -> usize {
        match self {
            LossKind::Pcc => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Nll => "nll",
            LossKind::Mse => "mse",
            LossKind::Kld => "kld",
            LossKind::Pcc => "pcc",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nll" => Ok(LossKind::Nll),
            "mse" => Ok(LossKind::Mse),
            "kld" => Ok(LossKind::Kld),
            "pcc" => Ok(LossKind::Pcc),
            other => Err(Error::Config(format!(
                "unknown loss {other:?} (expected nll|mse|kld|pcc)"
            ))),
        }
    }
}

/// Predictions and gold scores for `N` samples.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub predictions: Vec<ScoreDistribution<T>>,
    pub golds: Vec<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(predictions: Vec<ScoreDistribution<T>>, golds: Vec<T>) -> Result<Self> {
        if predictions.len() != golds.len() {
            return Err(Error::Shape {
                op: "batch",
                left: (predictions.len(), CLASSES),
                right: (golds.len(), 1),
            });
        }
        if predictions.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        for &g in &golds {
            check_gold(g.as_f64())?;
        }
        Ok(Batch { predictions, golds })
    }

    pub fn from_probs(probs: &[[T; CLASSES]], golds: &[T]) -> Result<Self> {
        Self::new(
            probs.iter().map(|&p| ScoreDistribution::from_probs(p)).collect(),
            golds.to_vec(),
        )
    }

    pub fn len(&self) -> usize {
        self.golds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.golds.is_empty()
    }

    pub fn scores(&self) -> Vec<T> {
        self.predictions.iter().map(|d| d.y).collect()
    }
}

/// Centered sums for the guarded correlation.
struct Moments<T> {
    dy: Vec<T>,
    dg: Vec<T>,
    cov: T,
    sy: T,
    sg: T,
}

fn moments<T: Scalar>(y: &[T], g: &[T]) -> Moments<T> {
    let n = T::lit(y.len() as f64);
    let my = y.iter().copied().sum::<T>() / n;
    let mg = g.iter().copied().sum::<T>() / n;
    let dy: Vec<T> = y.iter().map(|&v| v - my).collect();
    let dg: Vec<T> = g.iter().map(|&v| v - mg).collect();
    let cov = dy.iter().zip(&dg).map(|(&a, &b)| a * b).sum();
    let sy = dy.iter().map(|&a| a * a).sum::<T>().sqrt();
    let sg = dg.iter().map(|&a| a * a).sum::<T>().sqrt();
    Moments { dy, dg, cov, sy, sg }
}

fn guarded<T: Scalar>(s: T) -> T {
    s.max(T::lit(PCC_STD_FLOOR))
}

/// Pearson correlation; each standard deviation is floored at 1e-8 so a
/// constant input gives 0 instead of NaN.
pub fn pearson<T: Scalar>(y: &[T], gold: &[T]) -> Result<T> {
    if y.len() != gold.len() {
        return Err(Error::Shape {
            op: "pearson",
            left: (y.len(), 1),
            right: (gold.len(), 1),
        });
    }
    if y.len() < 2 {
        return Err(Error::Contract("correlation needs at least two samples".into()));
    }
    let m = moments(y, gold);
    let r = m.cov / (guarded(m.sy) * guarded(m.sg));
    Ok(r.max(-T::one()).min(T::one()))
}

pub fn batch_loss<T: Scalar>(kind: LossKind, batch: &Batch<T>) -> Result<T> {
    let n = batch.len();
    if n < kind.min_batch() {
        return Err(Error::Contract(format!(
            "{kind} loss needs at least {} samples",
            kind.min_batch()
        )));
    }
    Ok(match kind {
        LossKind::Nll => {
            let mut total = T::zero();
            for (d, &g) in batch.predictions.iter().zip(&batch.golds) {
                total -= d.p[nll_class(g)?].ln();
            }
            total
        }
        LossKind::Mse => {
            let sq: T = batch
                .predictions
                .iter()
                .zip(&batch.golds)
                .map(|(d, &g)| (d.y - g) * (d.y - g))
                .sum();
            sq / T::lit(n as f64)
        }
        LossKind::Kld => {
            let mut total = T::zero();
            for (d, &g) in batch.predictions.iter().zip(&batch.golds) {
                let target = gold_distribution(g)?;
                for (&t, &p) in target.iter().zip(&d.p) {
                    if t > T::zero() {
                        total += t * (t.ln() - p.ln());
                    }
                }
            }
            total
        }
        LossKind::Pcc => {
            let m = moments(&batch.scores(), &batch.golds);
            -(m.cov / (guarded(m.sy) * guarded(m.sg)))
        }
    })
}

/// `∂L/∂yⁿ` for the correlation loss.
pub fn pcc_score_gradient<T: Scalar>(y: &[T], gold: &[T]) -> Vec<T> {
    let m = moments(y, gold);
    let (gy, gg) = (guarded(m.sy), guarded(m.sg));
    let norm = gy * gg;
    // d sy / d yⁿ = (yⁿ − ȳ)/sy, and only counts while sy is above the floor
    let spread = if m.sy > T::lit(PCC_STD_FLOOR) {
        m.cov / (norm * gy * m.sy)
    } else {
        T::zero()
    };
    m.dg.iter()
        .zip(&m.dy)
        .map(|(&dg, &dy)| -(dg / norm - spread * dy))
        .collect()
}

/// `∂L/∂pⁿ` for every sample.
pub fn batch_loss_gradient<T: Scalar>(kind: LossKind, batch: &Batch<T>) -> Result<Vec<[T; CLASSES]>> {
    let n = batch.len();
    if n < kind.min_batch() {
        return Err(Error::Contract(format!(
            "{kind} loss needs at least {} samples",
            kind.min_batch()
        )));
    }
    let from_score_grads = |dy: Vec<T>| -> Vec<[T; CLASSES]> {
        dy.into_iter()
            .map(|d| std::array::from_fn(|i| d * T::lit(i as f64)))
            .collect()
    };
    match kind {
        LossKind::Nll => batch
            .predictions
            .iter()
            .zip(&batch.golds)
            .map(|(d, &g)| {
                let t = nll_class(g)?;
                let mut out = [T::zero(); CLASSES];
                out[t] = -T::one() / d.p[t];
                Ok(out)
            })
            .collect(),
        LossKind::Kld => batch
            .predictions
            .iter()
            .zip(&batch.golds)
            .map(|(d, &g)| {
                let target = gold_distribution(g)?;
                Ok(std::array::from_fn(|i| -target[i] / d.p[i]))
            })
            .collect(),
        LossKind::Mse => {
            let scale = T::lit(2.0 / n as f64);
            Ok(from_score_grads(
                batch
                    .predictions
                    .iter()
                    .zip(&batch.golds)
                    .map(|(d, &g)| scale * (d.y - g))
                    .collect(),
            ))
        }
        LossKind::Pcc => Ok(from_score_grads(pcc_score_gradient(&batch.scores(), &batch.golds))),
    }
}
