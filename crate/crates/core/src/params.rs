//! Named access to parameter tensors, shared by the optimizer, the gradient
//! checker and model serialization.

use crate::numkit::{Matrix, Scalar};

pub trait Parameters<T: Scalar> {
    /// Tensors in a fixed order, with names unique within `self`.
    fn params(&self) -> Vec<(String, &Matrix<T>)>;

    /// Same order and names as [`Parameters::params`].
    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, m)| m.data().len()).sum()
    }

    fn zero(&mut self) {
        for (_, m) in self.params_mut() {
            m.fill(T::zero());
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    fn first_non_finite(&self) -> Option<String> {
        self.params().into_iter().find(|(_, m)| !m.is_finite()).map(|(n, _)| n)
    }
}

pub(crate) fn prefixed<M>(prefix: &str, items: Vec<(String, M)>) -> Vec<(String, M)> {
    items.into_iter().map(|(n, m)| (format!("{prefix}.{n}"), m)).collect()
}
