//! Bidirectional GRU with attention pooling, plus exact reverse-mode passes.

mod attention;
pub(crate) mod gru;

pub use attention::{AttentionParams, SentenceEmbedding};
pub use gru::{GruCache, GruParams};

use crate::error::{Error, Result};
use crate::numkit::{Scalar, SeededRng};
use crate::params::{prefixed, Parameters};

/// Runs the forward chain left→right and the backward chain right→left, both
/// from zero states, and concatenates `[x^F_i; x^B_i]`.
///
/// Returns the states plus per-step caches (indexed by token position for
/// both directions).
/// States `[x^F_i; x^B_i]` with forward and backward step caches.
pub type BiGruOutput<T> = (Vec<Vec<T>>, Vec<GruCache<T>>, Vec<GruCache<T>>);

pub fn bigru_encode<T: Scalar, W: AsRef<[T]>>(
    fwd: &GruParams<T>,
    bwd: &GruParams<T>,
    words: &[W],
) -> Result<BiGruOutput<T>> {
    if words.is_empty() {
        return Err(Error::Contract("cannot encode an empty sequence".into()));
    }
    let h = fwd.hidden();
    if bwd.hidden() != h || bwd.input_dim() != fwd.input_dim() {
        return Err(Error::Shape {
            op: "bigru_encode",
            left: (h, fwd.input_dim()),
            right: (bwd.hidden(), bwd.input_dim()),
        });
    }
    if let Some(bad) = words.iter().find(|w| w.as_ref().len() != fwd.input_dim()) {
        return Err(Error::Shape {
            op: "bigru_encode",
            left: (h, fwd.input_dim()),
            right: (bad.as_ref().len(), 1),
        });
    }
    let n = words.len();
    let mut fwd_caches = Vec::with_capacity(n);
    let mut fwd_states = Vec::with_capacity(n);
    let mut state = vec![T::zero(); h];
    for w in words {
        let (next, cache) = fwd.step_unchecked(&state, w.as_ref());
        fwd_caches.push(cache);
        fwd_states.push(next.clone());
        state = next;
    }
    let mut bwd_caches = Vec::with_capacity(n);
    let mut bwd_states = Vec::with_capacity(n);
    let mut state = vec![T::zero(); h];
    for w in words.iter().rev() {
        let (next, cache) = bwd.step_unchecked(&state, w.as_ref());
        bwd_caches.push(cache);
        bwd_states.push(next.clone());
        state = next;
    }
    bwd_caches.reverse();
    bwd_states.reverse();
    let states = fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(mut x, b)| {
            x.extend(b);
            x
        })
        .collect();
    Ok((states, fwd_caches, bwd_caches))
}

/// Sentence encoder: BiGRU followed by attention pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub fwd: GruParams<T>,
    pub bwd: GruParams<T>,
    pub attention: AttentionParams<T>,
}

/// Everything the backward pass needs from one forward encoding.
#[derive(Debug, Clone)]
pub struct EncoderTape<T> {
    pub embedding: SentenceEmbedding<T>,
    fwd: Vec<GruCache<T>>,
    bwd: Vec<GruCache<T>>,
    acts: Vec<Vec<T>>,
    hidden: usize,
    input_dim: usize,
    width: usize,
}

impl<T> EncoderTape<T> {
    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }
}

/// Gradients from [`Encoder::backward`].
#[derive(Debug, Clone)]
pub struct EncoderGradients<T> {
    pub params: Encoder<T>,
    /// One row per input token.
    pub words: Vec<Vec<T>>,
}

impl<T: Scalar> Encoder<T> {
    pub fn zeros(input_dim: usize, hidden: usize, width: usize) -> Self {
        Encoder {
            fwd: GruParams::zeros(hidden, input_dim),
            bwd: GruParams::zeros(hidden, input_dim),
            attention: AttentionParams::zeros(width, 2 * hidden),
        }
    }

    pub fn random(input_dim: usize, hidden: usize, width: usize, rng: &mut SeededRng) -> Self {
        Encoder {
            fwd: GruParams::random(hidden, input_dim, rng),
            bwd: GruParams::random(hidden, input_dim, rng),
            attention: AttentionParams::random(width, 2 * hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }

    pub fn input_dim(&self) -> usize {
        self.fwd.input_dim()
    }

    /// Width of the sentence vector `u` (2H).
    pub fn output_dim(&self) -> usize {
        2 * self.hidden()
    }

    pub fn encode<W: AsRef<[T]>>(&self, words: &[W]) -> Result<EncoderTape<T>> {
        let (states, fwd, bwd) = bigru_encode(&self.fwd, &self.bwd, words)?;
        let (embedding, acts) = self.attention.attend(&states)?;
        Ok(EncoderTape {
            embedding,
            fwd,
            bwd,
            acts,
            hidden: self.hidden(),
            input_dim: self.input_dim(),
            width: self.attention.width(),
        })
    }

    pub fn embed<W: AsRef<[T]>>(&self, words: &[W]) -> Result<SentenceEmbedding<T>> {
        self.encode(words).map(|t| t.embedding)
    }

    fn check_tape(&self, tape: &EncoderTape<T>, du: &[T]) -> Result<()> {
        let ok = tape.hidden == self.hidden()
            && tape.input_dim == self.input_dim()
            && tape.width == self.attention.width()
            && tape.fwd.len() == tape.embedding.states.len()
            && tape.bwd.len() == tape.fwd.len()
            && !tape.fwd.is_empty();
        if !ok {
            return Err(Error::Contract("encoder tape does not match these parameters".into()));
        }
        if du.len() != self.output_dim() {
            return Err(Error::Shape {
                op: "encoder_backward",
                left: (self.output_dim(), 1),
                right: (du.len(), 1),
            });
        }
        Ok(())
    }

    /// Accumulates parameter gradients into `grads`; returns per-token
    /// input gradients.
    pub fn backward_into(&self, tape: &EncoderTape<T>, du: &[T], grads: &mut Encoder<T>) -> Result<Vec<Vec<T>>> {
        self.check_tape(tape, du)?;
        let h = self.hidden();
        let n = tape.len();
        let d_states = self
            .attention
            .backward(&tape.embedding, &tape.acts, du, &mut grads.attention);
        let mut d_words = vec![vec![T::zero(); self.input_dim()]; n];

        // forward chain: state i is the output of step i
        let mut carry = vec![T::zero(); h];
        for i in (0..n).rev() {
            for (c, &g) in carry.iter_mut().zip(&d_states[i][..h]) {
                *c += g;
            }
            carry = self
                .fwd
                .step_backward(&tape.fwd[i], &carry, &mut grads.fwd, &mut d_words[i]);
        }
        // backward chain runs right→left, so its reverse pass runs left→right
        let mut carry = vec![T::zero(); h];
        for i in 0..n {
            for (c, &g) in carry.iter_mut().zip(&d_states[i][h..]) {
                *c += g;
            }
            carry = self
                .bwd
                .step_backward(&tape.bwd[i], &carry, &mut grads.bwd, &mut d_words[i]);
        }
        Ok(d_words)
    }

    pub fn backward(&self, tape: &EncoderTape<T>, du: &[T]) -> Result<EncoderGradients<T>> {
        let mut params = Encoder::zeros(self.input_dim(), self.hidden(), self.attention.width());
        let words = self.backward_into(tape, du, &mut params)?;
        Ok(EncoderGradients { params, words })
    }
}

impl<T: Scalar> Parameters<T> for Encoder<T> {
    fn params(&self) -> Vec<(String, &crate::numkit::Matrix<T>)> {
        let mut out = prefixed("fwd", self.fwd.params());
        out.extend(prefixed("bwd", self.bwd.params()));
        out.extend(prefixed("att", self.attention.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut crate::numkit::Matrix<T>)> {
        let mut out = prefixed("fwd", self.fwd.params_mut());
        out.extend(prefixed("bwd", self.bwd.params_mut()));
        out.extend(prefixed("att", self.attention.params_mut()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{norm, Matrix};

    fn random_words(n: usize, d: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect()
    }

    #[test]
    fn single_token_sees_zero_initial_state() {
        let mut rng = SeededRng::new(1);
        let enc = Encoder::<f64>::random(3, 4, 4, &mut rng);
        let w = random_words(1, 3, &mut rng);
        let (states, _, _) = bigru_encode(&enc.fwd, &enc.bwd, &w).unwrap();
        let (f, _) = enc.fwd.step(&[0.0; 4], &w[0]).unwrap();
        let (b, _) = enc.bwd.step(&[0.0; 4], &w[0]).unwrap();
        assert_eq!(states[0], [f, b].concat());
    }

    #[test]
    fn palindrome_with_shared_directions_mirrors() {
        let mut rng = SeededRng::new(2);
        let cell = GruParams::<f64>::random(4, 3, &mut rng);
        let a = random_words(2, 3, &mut rng);
        let words = vec![
            a[0].clone(),
            a[1].clone(),
            random_words(1, 3, &mut rng)[0].clone(),
            a[1].clone(),
            a[0].clone(),
        ];
        let (states, _, _) = bigru_encode(&cell, &cell, &words).unwrap();
        let n = words.len();
        for i in 0..n {
            let fwd = &states[i][..4];
            let bwd = &states[n - 1 - i][4..];
            for (x, y) in fwd.iter().zip(bwd) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_params_give_zero_states() {
        let enc = Encoder::<f64>::zeros(3, 4, 4);
        let words = random_words(4, 3, &mut SeededRng::new(3));
        let e = enc.embed(&words).unwrap();
        assert!(e.states.iter().flatten().all(|&x| x == 0.0));
        assert!(e.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_sequence_errors() {
        let enc = Encoder::<f64>::zeros(3, 4, 4);
        assert!(matches!(enc.encode::<Vec<f64>>(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn null_cotangent_gives_zero_gradients() {
        let mut rng = SeededRng::new(4);
        let enc = Encoder::<f64>::random(3, 4, 4, &mut rng);
        let words = random_words(3, 3, &mut rng);
        let tape = enc.encode(&words).unwrap();
        let g = enc.backward(&tape, &[0.0; 8]).unwrap();
        assert!(g.params.params().iter().all(|(_, m)| m.max_abs() == 0.0));
        assert!(g.words.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn mismatched_tape_is_rejected() {
        let mut rng = SeededRng::new(5);
        let enc = Encoder::<f64>::random(3, 4, 4, &mut rng);
        let other = Encoder::<f64>::random(3, 5, 4, &mut rng);
        let tape = other.encode(&random_words(2, 3, &mut rng)).unwrap();
        assert!(matches!(enc.backward(&tape, &[0.0; 8]), Err(Error::Contract(_))));
        let tape = enc.encode(&random_words(2, 3, &mut rng)).unwrap();
        assert!(matches!(enc.backward(&tape, &[0.0; 7]), Err(Error::Shape { .. })));
    }

    type Perturb<'a> = dyn FnMut(&mut Encoder<f64>, &mut Vec<Vec<f64>>, f64) + 'a;

    /// Central-difference oracle for `L = c·u`.
    fn numeric_gradient(enc: &Encoder<f64>, words: &[Vec<f64>], c: &[f64], perturb: &mut Perturb<'_>) -> f64 {
        let h = 1e-5;
        let eval = |e: &Encoder<f64>, w: &Vec<Vec<f64>>| -> f64 {
            e.embed(w).unwrap().u.iter().zip(c).map(|(a, b)| a * b).sum()
        };
        let (mut e1, mut w1) = (enc.clone(), words.to_vec());
        perturb(&mut e1, &mut w1, h);
        let (mut e2, mut w2) = (enc.clone(), words.to_vec());
        perturb(&mut e2, &mut w2, -h);
        (eval(&e1, &w1) - eval(&e2, &w2)) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(6);
        let mut enc = Encoder::<f64>::random(3, 4, 4, &mut rng);
        // nonzero biases so their gradients are exercised away from zero
        for (_, m) in enc.params_mut() {
            if m.cols() == 1 {
                for x in m.data_mut() {
                    *x = rng.uniform(-0.5, 0.5);
                }
            }
        }
        let words = random_words(3, 3, &mut rng);
        let c: Vec<f64> = (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let tape = enc.encode(&words).unwrap();
        let g = enc.backward(&tape, &c).unwrap();

        let names: Vec<String> = enc.params().into_iter().map(|(n, _)| n).collect();
        let analytic: Vec<Matrix<f64>> = g.params.params().into_iter().map(|(_, m)| m.clone()).collect();
        let mut worst = 0.0f64;
        for (pi, name) in names.iter().enumerate() {
            for k in 0..analytic[pi].data().len() {
                let fd = numeric_gradient(&enc, &words, &c, &mut |e, _, h| {
                    e.params_mut()[pi].1.data_mut()[k] += h;
                });
                let err = rel_err(analytic[pi].data()[k], fd);
                assert!(
                    err < 1e-4,
                    "{name}[{k}]: analytic {} vs fd {fd}",
                    analytic[pi].data()[k]
                );
                worst = worst.max(err);
            }
        }
        for t in 0..words.len() {
            for k in 0..3 {
                let fd = numeric_gradient(&enc, &words, &c, &mut |_, w, h| w[t][k] += h);
                assert!(rel_err(g.words[t][k], fd) < 1e-4, "word {t}[{k}]");
            }
        }
        assert!(worst < 1e-4);
    }

    #[test]
    fn peaked_attention_token_dominates_input_gradient() {
        let mut rng = SeededRng::new(7);
        let mut enc = Encoder::<f64>::random(3, 4, 4, &mut rng);
        for x in enc.attention.r.data_mut() {
            *x *= 60.0;
        }
        for x in enc.attention.w.data_mut() {
            *x *= 20.0;
        }
        let words = random_words(4, 3, &mut rng);
        let tape = enc.encode(&words).unwrap();
        let weights = &tape.embedding.weights;
        let (peak, &top) = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!(top > 0.99, "attention not peaked: {weights:?}");
        let du: Vec<f64> = vec![1.0; 8];
        let g = enc.backward(&tape, &du).unwrap();
        let norms: Vec<f64> = g.words.iter().map(|w| norm(w)).collect();
        for (i, n) in norms.iter().enumerate() {
            if i != peak {
                assert!(norms[peak] > *n, "norms {norms:?}, peak {peak}");
            }
        }
    }

    #[test]
    fn token_order_matters() {
        let mut rng = SeededRng::new(8);
        let enc = Encoder::<f64>::random(3, 4, 4, &mut rng);
        let words = random_words(3, 3, &mut rng);
        let swapped = vec![words[1].clone(), words[0].clone(), words[2].clone()];
        let a = enc.embed(&words).unwrap().u;
        let b = enc.embed(&swapped).unwrap().u;
        let diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff > 1e-3, "max diff {diff}");
    }
}
