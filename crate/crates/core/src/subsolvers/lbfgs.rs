use std::collections::VecDeque;

use crate::linalg::{axpy, norm, Vector};

pub const DEFAULT_CAPACITY: usize = 5;

#[derive(Clone, Debug)]
struct Pair {
    s: Vector,
    y: Vector,
    rho: f64,
}

/// Ring buffer of curvature pairs `(s, y, 1/⟨s, y⟩)`.
#[derive(Clone, Debug)]
pub struct LbfgsBuffer {
    capacity: usize,
    pairs: VecDeque<Pair>,
}

impl Default for LbfgsBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl LbfgsBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "L-BFGS capacity must be positive");
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Store `(s, y)` if `⟨s, y⟩ > 1e-12‖s‖‖y‖`; returns whether it was kept.
    pub fn push(&mut self, s: Vector, y: Vector) -> bool {
        let sy = s.dot(&y);
        if !(sy > 1e-12 * norm(&s) * norm(&y)) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(Pair {
            s,
            y,
            rho: 1.0 / sy,
        });
        true
    }
}

/// Two-loop recursion: `−H grad` for the implicit inverse-Hessian approximation `H`.
pub fn lbfgs_direction(buffer: &LbfgsBuffer, grad: &Vector) -> Vector {
    let mut q = grad.clone();
    let Some(newest) = buffer.pairs.back() else {
        return -q;
    };
    let mut alphas = Vec::with_capacity(buffer.pairs.len());
    for p in buffer.pairs.iter().rev() {
        let a = p.rho * p.s.dot(&q);
        axpy(-a, &p.y, &mut q);
        alphas.push(a);
    }
    let h0 = newest.s.dot(&newest.y) / newest.y.dot(&newest.y);
    q *= h0;
    for (p, a) in buffer.pairs.iter().zip(alphas.into_iter().rev()) {
        let b = p.rho * p.y.dot(&q);
        axpy(a - b, &p.s, &mut q);
    }
    -q
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::<f64>::identity(n, n);
        Array2::from_shape_fn((n, n), |(i, j)| a[(i, j)])
    }

    #[test]
    fn empty_buffer_is_steepest_descent() {
        let g = array![1.0, -2.0, 0.5];
        assert_eq!(lbfgs_direction(&LbfgsBuffer::default(), &g), -g);
    }

    #[test]
    fn single_pair_satisfies_secant_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let h = spd(4, &mut rng);
        let s: Vector = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = h.dot(&s);
        let mut buf = LbfgsBuffer::default();
        assert!(buf.push(s.clone(), y.clone()));
        let d = lbfgs_direction(&buf, &y);
        for i in 0..4 {
            assert!((d[i] + s[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn curvature_guard_rejects_bad_pairs() {
        let mut buf = LbfgsBuffer::default();
        assert!(!buf.push(array![1.0, 0.0], array![-1.0, 0.0]));
        assert!(!buf.push(array![1.0, 0.0], array![0.0, 1.0]));
        assert!(buf.is_empty());
    }

    #[test]
    fn capacity_is_respected() {
        let mut buf = LbfgsBuffer::new(2);
        for k in 1..=4 {
            buf.push(array![k as f64, 1.0], array![k as f64, 1.0]);
        }
        assert_eq!(buf.len(), 2);
    }

    #[test]
    fn approaches_newton_direction_on_quadratic() {
        // Minimize ½xᵀHx with the L-BFGS iteration itself, then compare the direction
        // at the final point against the dense Newton step.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 5;
        let h = spd(n, &mut rng);
        let hd = DMatrix::<f64>::from_fn(n, n, |i, j| h[[i, j]]);
        let mut x: Vector = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut buf = LbfgsBuffer::default();
        for _ in 0..10 {
            let g = h.dot(&x);
            let d = lbfgs_direction(&buf, &g);
            // Exact linesearch on the quadratic.
            let t = -g.dot(&d) / d.dot(&h.dot(&d));
            let xn = &x + &(&d * t);
            buf.push(&xn - &x, h.dot(&xn) - &g);
            x = xn;
        }
        let g = h.dot(&x);
        let d = lbfgs_direction(&buf, &g);
        let gd = DVector::from_iterator(n, g.iter().copied());
        let newton = hd.lu().solve(&gd).unwrap();
        let newton = Vector::from_iter(newton.iter().map(|v| -v));
        assert!(norm(&(&d - &newton)) <= 0.1 * norm(&newton));
    }

    #[test]
    fn directions_are_descent_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..50 {
            let mut buf = LbfgsBuffer::default();
            for _ in 0..8 {
                let s: Vector = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vector = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
                buf.push(s, y);
            }
            let g: Vector = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(lbfgs_direction(&buf, &g).dot(&g) < 0.0);
        }
    }
}
