use crate::error::{Error, Result};
use crate::numkit::{Matrix, Scalar};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Moment accumulators for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: Matrix<T>,
    pub v: Matrix<T>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn for_param(param: &Matrix<T>) -> Self {
        Self::new(param.rows(), param.cols())
    }
}

/// One bias-corrected Adam update, applied to `param` in place.
pub fn adam_step<T: Scalar>(param: &mut Matrix<T>, grad: &Matrix<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::Shape {
            op: "adam_step",
            left: param.shape(),
            right: grad.shape(),
        });
    }
    if state.m.shape() != param.shape() {
        return Err(Error::Shape {
            op: "adam_step(state)",
            left: param.shape(),
            right: state.m.shape(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(state.beta1), T::lit(state.beta2));
    let one = T::one();
    let c1 = T::lit(1.0 - state.beta1.powi(t));
    let c2 = T::lit(1.0 - state.beta2.powi(t));
    let lr = T::lit(lr);
    let eps = T::lit(state.epsilon);

    let params = param.data_mut().iter_mut();
    let moments = state.m.data_mut().iter_mut().zip(state.v.data_mut().iter_mut());
    for ((p, &g), (m, v)) in params.zip(grad.data()).zip(moments) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
