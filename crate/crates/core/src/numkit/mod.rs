//! Dense linear algebra, activations, seeded initialization and Adam.

mod activation;
mod adam;
mod matrix;
mod rng;
mod scalar;

pub use activation::{dot, norm, sigmoid, softmax, softmax_backward, tanh};
pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use matrix::{matmul, Matrix};
pub use rng::{init_uniform, SeededRng};
pub use scalar::Scalar;
