use crate::error::{Error, Result};
use crate::numkit::{dot, init_uniform, softmax, Matrix, Scalar, SeededRng};
use crate::params::Parameters;

/// Additive attention scorer: `ℓⱼ = rᵀ tanh(W xⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    /// `A × 2H` projection.
    pub w: Matrix<T>,
    /// `A × 1` scoring vector.
    pub r: Matrix<T>,
}

/// Attention-pooled sentence vector with the states and weights behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding<T> {
    pub u: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn zeros(width: usize, state_dim: usize) -> Self {
        AttentionParams {
            w: Matrix::zeros(width, state_dim),
            r: Matrix::zeros(width, 1),
        }
    }

    pub fn random(width: usize, state_dim: usize, rng: &mut SeededRng) -> Self {
        AttentionParams {
            w: init_uniform(width, state_dim, 1.0 / (state_dim as f64).sqrt(), rng),
            r: init_uniform(width, 1, 1.0 / (width as f64).sqrt(), rng),
        }
    }

    pub fn width(&self) -> usize {
        self.w.rows()
    }

    pub fn state_dim(&self) -> usize {
        self.w.cols()
    }

    /// Pools `states` into one vector. Also returns `tanh(W xⱼ)` per state.
    pub fn attend(&self, states: &[Vec<T>]) -> Result<(SentenceEmbedding<T>, Vec<Vec<T>>)> {
        if states.is_empty() {
            return Err(Error::Contract("attention over an empty sequence".into()));
        }
        if let Some(bad) = states.iter().find(|x| x.len() != self.state_dim()) {
            return Err(Error::Shape {
                op: "attend",
                left: self.w.shape(),
                right: (bad.len(), 1),
            });
        }
        let acts: Vec<Vec<T>> = states
            .iter()
            .map(|x| {
                let mut a = vec![T::zero(); self.width()];
                self.w.add_mul_vec(x, &mut a);
                a.into_iter().map(T::tanh).collect()
            })
            .collect();
        let logits: Vec<T> = acts.iter().map(|a| dot(self.r.data(), a)).collect();
        let weights = softmax(&logits);
        let mut u = vec![T::zero(); self.state_dim()];
        for (x, &a) in states.iter().zip(&weights) {
            for (o, &xi) in u.iter_mut().zip(x) {
                *o += a * xi;
            }
        }
        let emb = SentenceEmbedding {
            u,
            states: states.to_vec(),
            weights,
        };
        Ok((emb, acts))
    }

    /// Reverse of [`AttentionParams::attend`]. Returns the gradient for each state.
    pub(crate) fn backward(
        &self,
        emb: &SentenceEmbedding<T>,
        acts: &[Vec<T>],
        du: &[T],
        grads: &mut AttentionParams<T>,
    ) -> Vec<Vec<T>> {
        let a = &emb.weights;
        // dL/daⱼ = du·xⱼ, then through the softmax
        let da: Vec<T> = emb.states.iter().map(|x| dot(du, x)).collect();
        let mean = dot(a, &da);
        let one = T::one();
        emb.states
            .iter()
            .zip(acts)
            .enumerate()
            .map(|(j, (x, act))| {
                let mut dx: Vec<T> = du.iter().map(|&g| a[j] * g).collect();
                let dlogit = a[j] * (da[j] - mean);
                if dlogit != T::zero() {
                    let dpre: Vec<T> = act
                        .iter()
                        .zip(self.r.data())
                        .map(|(&t, &r)| dlogit * r * (one - t * t))
                        .collect();
                    for (g, &t) in grads.r.data_mut().iter_mut().zip(act) {
                        *g += dlogit * t;
                    }
                    grads.w.add_outer(&dpre, x);
                    self.w.add_tmul_vec(&dpre, &mut dx);
                }
                dx
            })
            .collect()
    }
}

impl<T: Scalar> Parameters<T> for AttentionParams<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        vec![("w".into(), &self.w), ("r".into(), &self.r)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        vec![("w".into(), &mut self.w), ("r".into(), &mut self.r)]
    }
}
