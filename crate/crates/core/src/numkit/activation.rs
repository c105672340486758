use crate::numkit::Scalar;

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    // Branch keeps exp() from overflowing for large |x|.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn tanh<T: Scalar>(x: T) -> T {
    x.tanh()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = z.iter().map(|&x| (x - max).exp()).collect();
    let total: T = out.iter().copied().sum();
    for p in out.iter_mut() {
        *p /= total;
    }
    out
}

/// Backward of softmax: given `p = softmax(z)` and `dL/dp`, returns `dL/dz`.
pub fn softmax_backward<T: Scalar>(p: &[T], dp: &[T]) -> Vec<T> {
    let inner: T = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
    p.iter().zip(dp).map(|(&pi, &di)| pi * (di - inner)).collect()
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
