use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{axpy, norm, LinearOperator, Vector};

/// Smallest Ritz pair of a symmetric operator.
#[derive(Clone, Debug)]
pub struct EigEstimate {
    pub lambda_min: f64,
    /// Unit Ritz vector.
    pub v: Vector,
    /// `‖Bv − λv‖` as estimated by the Lanczos recurrence.
    pub residual: f64,
    /// Number of operator applications spent.
    pub iterations: usize,
}

impl EigEstimate {
    /// Ritz value minus its residual; the value used by stopping tests.
    pub fn certified_lower(&self) -> f64 {
        self.lambda_min - self.residual
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Smallest eigenpair of `T` plus the spectral radius of `T`.
fn smallest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>, f64) {
    let eig = SymmetricEigen::new(tridiagonal(alpha, beta));
    let mut imin = 0;
    let mut radius = 0.0_f64;
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        if *l < eig.eigenvalues[imin] {
            imin = i;
        }
        radius = radius.max(l.abs());
    }
    let y = eig.eigenvectors.column(imin).iter().copied().collect();
    (eig.eigenvalues[imin], y, radius)
}

/// Lanczos with full reorthogonalization for the smallest eigenpair of a symmetric
/// operator. The start vector has entries uniform in `(0, 1]`, drawn from `seed`.
///
/// Stops once the Ritz residual falls below `tol · ‖T‖`, the Krylov space becomes
/// invariant, or `min(dim, max_iter)` vectors have been built. The returned vector
/// is oriented so that it has a nonnegative inner product with the start vector.
pub fn lanczos_min_eig(
    op: &dyn LinearOperator,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> EigEstimate {
    let n = op.dim();
    let kmax = n.min(max_iter.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vector = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
    q /= norm(&q);
    let start = q.clone();

    let mut basis: Vec<Vector> = Vec::with_capacity(kmax);
    let mut alpha = Vec::with_capacity(kmax);
    let mut beta: Vec<f64> = Vec::with_capacity(kmax);
    let mut ritz = (0.0, vec![1.0], 0.0);
    let mut residual = 0.0;

    for j in 0..kmax {
        let mut w = op.apply(&q);
        let a = q.dot(&w);
        alpha.push(a);
        basis.push(q);
        // Full reorthogonalization, twice for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                axpy(-c, b, &mut w);
            }
        }
        let bnext = norm(&w);
        ritz = smallest_ritz(&alpha, &beta);
        let last = *ritz.1.last().unwrap_or(&0.0);
        residual = (bnext * last).abs();
        let scale = ritz.2.max(f64::MIN_POSITIVE);
        let invariant = bnext <= 1e-13 * scale.max(a.abs()).max(1.0);
        if invariant || residual <= tol * scale || j + 1 == kmax {
            if invariant {
                residual = 0.0;
            }
            break;
        }
        beta.push(bnext);
        q = w / bnext;
    }

    let (lambda, y, _) = ritz;
    let mut v = Vector::zeros(n);
    for (c, b) in y.iter().zip(&basis) {
        axpy(*c, b, &mut v);
    }
    let nv = norm(&v);
    if nv > 0.0 {
        v /= nv;
    }
    if v.dot(&start) < 0.0 {
        v = -v;
    }
    EigEstimate {
        lambda_min: lambda,
        v,
        residual,
        iterations: basis.len(),
    }
}
