use crate::error::{Error, Result};
use crate::numkit::{init_uniform, sigmoid, Matrix, Scalar, SeededRng};
use crate::params::Parameters;

/// One GRU direction: update gate `z`, reset gate `r`, candidate `h̃`.
///
/// ```text
/// z = σ(Wz·w + Uz·h + bz)
/// r = σ(Wr·w + Ur·h + br)
/// h̃ = tanh(Wh·w + Uh·(r ⊙ h) + bh)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub wz: Matrix<T>,
    pub uz: Matrix<T>,
    pub bz: Matrix<T>,
    pub wr: Matrix<T>,
    pub ur: Matrix<T>,
    pub br: Matrix<T>,
    pub wh: Matrix<T>,
    pub uh: Matrix<T>,
    pub bh: Matrix<T>,
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache<T> {
    pub h_prev: Vec<T>,
    pub input: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub candidate: Vec<T>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let (h, d) = (hidden, input);
        GruParams {
            wz: Matrix::zeros(h, d),
            uz: Matrix::zeros(h, h),
            bz: Matrix::zeros(h, 1),
            wr: Matrix::zeros(h, d),
            ur: Matrix::zeros(h, h),
            br: Matrix::zeros(h, 1),
            wh: Matrix::zeros(h, d),
            uh: Matrix::zeros(h, h),
            bh: Matrix::zeros(h, 1),
        }
    }

    /// Weights uniform in ±1/√fan_in, biases zero.
    pub fn random(hidden: usize, input: usize, rng: &mut SeededRng) -> Self {
        let (h, d) = (hidden, input);
        let sw = 1.0 / (d as f64).sqrt();
        let su = 1.0 / (h as f64).sqrt();
        let mut p = Self::zeros(h, d);
        p.wz = init_uniform(h, d, sw, rng);
        p.uz = init_uniform(h, h, su, rng);
        p.wr = init_uniform(h, d, sw, rng);
        p.ur = init_uniform(h, h, su, rng);
        p.wh = init_uniform(h, d, sw, rng);
        p.uh = init_uniform(h, h, su, rng);
        p
    }

    pub fn hidden(&self) -> usize {
        self.wz.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.wz.cols()
    }

    /// Single recurrence step with shape checks.
    pub fn step(&self, h_prev: &[T], input: &[T]) -> Result<(Vec<T>, GruCache<T>)> {
        if h_prev.len() != self.hidden() || input.len() != self.input_dim() {
            return Err(Error::Shape {
                op: "gru_step",
                left: (self.hidden(), self.input_dim()),
                right: (h_prev.len(), input.len()),
            });
        }
        Ok(self.step_unchecked(h_prev, input))
    }

    pub(crate) fn step_unchecked(&self, h_prev: &[T], input: &[T]) -> (Vec<T>, GruCache<T>) {
        let h = self.hidden();
        let gate = |w: &Matrix<T>, u: &Matrix<T>, b: &Matrix<T>, state: &[T]| {
            let mut a = b.data().to_vec();
            w.add_mul_vec(input, &mut a);
            u.add_mul_vec(state, &mut a);
            a
        };
        let z: Vec<T> = gate(&self.wz, &self.uz, &self.bz, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<T> = gate(&self.wr, &self.ur, &self.br, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        let candidate: Vec<T> = gate(&self.wh, &self.uh, &self.bh, &reset)
            .into_iter()
            .map(T::tanh)
            .collect();
        let out = (0..h)
            .map(|k| (T::one() - z[k]) * h_prev[k] + z[k] * candidate[k])
            .collect();
        let cache = GruCache {
            h_prev: h_prev.to_vec(),
            input: input.to_vec(),
            z,
            r,
            candidate,
        };
        (out, cache)
    }

    /// Reverse of one step. Accumulates parameter gradients into `grads` and
    /// the input gradient into `d_input`; returns the gradient w.r.t. `h_prev`.
    pub(crate) fn step_backward(
        &self,
        cache: &GruCache<T>,
        d_out: &[T],
        grads: &mut GruParams<T>,
        d_input: &mut [T],
    ) -> Vec<T> {
        let h = self.hidden();
        let one = T::one();
        let GruCache {
            h_prev,
            input,
            z,
            r,
            candidate,
        } = cache;

        let mut d_prev: Vec<T> = (0..h).map(|k| d_out[k] * (one - z[k])).collect();

        // candidate branch
        let d_cand_pre: Vec<T> = (0..h)
            .map(|k| d_out[k] * z[k] * (one - candidate[k] * candidate[k]))
            .collect();
        let reset: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        grads.wh.add_outer(&d_cand_pre, input);
        grads.uh.add_outer(&d_cand_pre, &reset);
        add_into(grads.bh.data_mut(), &d_cand_pre);
        self.wh.add_tmul_vec(&d_cand_pre, d_input);
        let mut d_reset = vec![T::zero(); h];
        self.uh.add_tmul_vec(&d_cand_pre, &mut d_reset);

        // reset gate
        let d_r_pre: Vec<T> = (0..h)
            .map(|k| {
                d_prev[k] += d_reset[k] * r[k];
                d_reset[k] * h_prev[k] * r[k] * (one - r[k])
            })
            .collect();
        grads.wr.add_outer(&d_r_pre, input);
        grads.ur.add_outer(&d_r_pre, h_prev);
        add_into(grads.br.data_mut(), &d_r_pre);
        self.wr.add_tmul_vec(&d_r_pre, d_input);
        self.ur.add_tmul_vec(&d_r_pre, &mut d_prev);

        // update gate
        let d_z_pre: Vec<T> = (0..h)
            .map(|k| d_out[k] * (candidate[k] - h_prev[k]) * z[k] * (one - z[k]))
            .collect();
        grads.wz.add_outer(&d_z_pre, input);
        grads.uz.add_outer(&d_z_pre, h_prev);
        add_into(grads.bz.data_mut(), &d_z_pre);
        self.wz.add_tmul_vec(&d_z_pre, d_input);
        self.uz.add_tmul_vec(&d_z_pre, &mut d_prev);

        d_prev
    }
}

#[inline]
pub(crate) fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl<T: Scalar> Parameters<T> for GruParams<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        vec![
            ("wz".into(), &self.wz),
            ("uz".into(), &self.uz),
            ("bz".into(), &self.bz),
            ("wr".into(), &self.wr),
            ("ur".into(), &self.ur),
            ("br".into(), &self.br),
            ("wh".into(), &self.wh),
            ("uh".into(), &self.uh),
            ("bh".into(), &self.bh),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        vec![
            ("wz".into(), &mut self.wz),
            ("uz".into(), &mut self.uz),
            ("bz".into(), &mut self.bz),
            ("wr".into(), &mut self.wr),
            ("ur".into(), &mut self.ur),
            ("br".into(), &mut self.br),
            ("wh".into(), &mut self.wh),
            ("uh".into(), &mut self.uh),
            ("bh".into(), &mut self.bh),
        ]
    }
}
