//! Small dense-vector helpers shared by the solvers.

use ndarray::{Array1, Array2};

pub type Vector = Array1<f64>;

#[inline]
pub fn dot(a: &Vector, b: &Vector) -> f64 {
    a.dot(b)
}

#[inline]
pub fn norm(a: &Vector) -> f64 {
    a.dot(a).sqrt()
}

#[inline]
pub fn norm_inf(a: &Vector) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn all_finite(a: &Vector) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &Vector, y: &mut Vector) {
    y.scaled_add(alpha, x);
}

/// A symmetric linear map applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &Vector) -> Vector;
}

impl LinearOperator for Array2<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &Vector) -> Vector {
        self.dot(v)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, v: &Vector) -> Vector {
        (**self).apply(v)
    }
}

/// Densify a matrix-free operator column by column. Only meant for small test dimensions.
pub fn densify(op: &dyn LinearOperator) -> Array2<f64> {
    let n = op.dim();
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Vector::zeros(n);
        e[j] = 1.0;
        out.column_mut(j).assign(&op.apply(&e));
    }
    out
}

/// Largest eigenvalue magnitude of a symmetric operator by power iteration on the
/// operator itself (|lambda| of the dominant eigenvalue).
pub fn power_norm(op: &dyn LinearOperator, start: &Vector, iters: usize) -> f64 {
    let mut v = start.clone();
    let n0 = norm(&v);
    if n0 == 0.0 {
        return 0.0;
    }
    v /= n0;
    let mut est = 0.0;
    for _ in 0..iters {
        let w = op.apply(&v);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        est = nw;
        v = w / nw;
    }
    est
}
