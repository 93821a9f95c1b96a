//! Problem abstraction: first- and second-order oracles for the smooth part `f`
//! and the proximable part `g`, plus call counting.

use std::cell::Cell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm, Vector};

/// Which oracle entry point a matrix-vector cost is being asked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothCall {
    Eval,
    Grad,
    Hvp,
}

/// Smooth term `f` with Lipschitz-continuous gradient.
///
/// Implementations are deterministic pure functions of their inputs.
pub trait SmoothOracle {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> f64;
    fn grad(&self, x: &Vector) -> Vector;
    /// Hessian-vector product `∇²f(x) v`.
    fn hvp(&self, x: &Vector, v: &Vector) -> Vector;
    /// Known upper estimate of the gradient Lipschitz constant, if any.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
    /// Number of data matrix-vector products one call of `kind` performs.
    fn mvp_cost(&self, _kind: SmoothCall) -> u64 {
        0
    }
}

/// Nonsmooth term `g`: value, proximal map and a Clarke Jacobian element of the prox.
pub trait NonsmoothOracle {
    /// `+inf` outside the domain.
    fn eval(&self, x: &Vector) -> f64;
    /// An element of `prox_{γg}(y)`.
    fn prox(&self, y: &Vector, gamma: f64) -> Vector;
    /// `P v` for a fixed element `P` of the Clarke Jacobian of `prox_{γg}` at `y`.
    fn prox_jvp(&self, y: &Vector, gamma: f64, v: &Vector) -> Vector;
    /// Weak-convexity modulus; zero for convex `g`.
    fn weak_convexity(&self) -> f64 {
        0.0
    }
}

/// Oracle call tallies for one solver run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounters {
    pub eval_f: u64,
    pub eval_g: u64,
    pub grad_f: u64,
    pub prox_g: u64,
    pub jprox_g: u64,
    pub hvp_f: u64,
    /// Data matrix-vector products performed inside the `f` oracle calls above.
    pub mvp: u64,
}

impl CallCounters {
    /// `(name, value)` pairs in the order used by the report tables.
    pub fn entries(&self) -> [(&'static str, u64); 7] {
        [
            ("eval_f", self.eval_f),
            ("eval_g", self.eval_g),
            ("grad_f", self.grad_f),
            ("prox_g", self.prox_g),
            ("jprox_g", self.jprox_g),
            ("hvp_f", self.hvp_f),
            ("mvp", self.mvp),
        ]
    }
}

/// Interior-mutable counter set owned by a single run.
#[derive(Debug, Default)]
pub struct Counters(Cell<CallCounters>);

impl Counters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> CallCounters {
        self.0.get()
    }

    fn bump(&self, f: impl FnOnce(&mut CallCounters)) {
        let mut c = self.0.get();
        f(&mut c);
        self.0.set(c);
    }
}

/// Forwarding wrapper around a smooth oracle that tallies every call.
pub struct CountingSmooth<'a> {
    inner: &'a dyn SmoothOracle,
    counters: &'a Counters,
}

/// Forwarding wrapper around a nonsmooth oracle that tallies every call.
pub struct CountingNonsmooth<'a> {
    inner: &'a dyn NonsmoothOracle,
    counters: &'a Counters,
}

pub fn wrap_smooth<'a>(inner: &'a dyn SmoothOracle, counters: &'a Counters) -> CountingSmooth<'a> {
    CountingSmooth { inner, counters }
}

pub fn wrap_nonsmooth<'a>(
    inner: &'a dyn NonsmoothOracle,
    counters: &'a Counters,
) -> CountingNonsmooth<'a> {
    CountingNonsmooth { inner, counters }
}

impl SmoothOracle for CountingSmooth<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &Vector) -> f64 {
        let mvp = self.inner.mvp_cost(SmoothCall::Eval);
        self.counters.bump(|c| {
            c.eval_f += 1;
            c.mvp += mvp;
        });
        self.inner.eval(x)
    }

    fn grad(&self, x: &Vector) -> Vector {
        let mvp = self.inner.mvp_cost(SmoothCall::Grad);
        self.counters.bump(|c| {
            c.grad_f += 1;
            c.mvp += mvp;
        });
        self.inner.grad(x)
    }

    fn hvp(&self, x: &Vector, v: &Vector) -> Vector {
        let mvp = self.inner.mvp_cost(SmoothCall::Hvp);
        self.counters.bump(|c| {
            c.hvp_f += 1;
            c.mvp += mvp;
        });
        self.inner.hvp(x, v)
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        self.inner.lipschitz_hint()
    }

    fn mvp_cost(&self, kind: SmoothCall) -> u64 {
        self.inner.mvp_cost(kind)
    }
}

impl NonsmoothOracle for CountingNonsmooth<'_> {
    fn eval(&self, x: &Vector) -> f64 {
        self.counters.bump(|c| c.eval_g += 1);
        self.inner.eval(x)
    }

    fn prox(&self, y: &Vector, gamma: f64) -> Vector {
        self.counters.bump(|c| c.prox_g += 1);
        self.inner.prox(y, gamma)
    }

    fn prox_jvp(&self, y: &Vector, gamma: f64, v: &Vector) -> Vector {
        self.counters.bump(|c| c.jprox_g += 1);
        self.inner.prox_jvp(y, gamma, v)
    }

    fn weak_convexity(&self) -> f64 {
        self.inner.weak_convexity()
    }
}

/// The pair `(f, g)` of a composite objective `φ = f + g`.
#[derive(Clone, Copy)]
pub struct Composite<'a> {
    pub smooth: &'a dyn SmoothOracle,
    pub nonsmooth: &'a dyn NonsmoothOracle,
}

impl<'a> Composite<'a> {
    pub fn new(smooth: &'a dyn SmoothOracle, nonsmooth: &'a dyn NonsmoothOracle) -> Self {
        Self { smooth, nonsmooth }
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn phi(&self, x: &Vector) -> f64 {
        self.smooth.eval(x) + self.nonsmooth.eval(x)
    }
}

const LIPSCHITZ_PROBES: usize = 5;
const LIPSCHITZ_STEP: f64 = 1e-3;
const LIPSCHITZ_FLOOR: f64 = 1e-12;

/// Gradient Lipschitz estimate: the oracle's hint combined with finite-difference
/// probes along random unit directions around `x0`.
pub fn estimate_lipschitz(oracle: &dyn SmoothOracle, x0: &Vector, seed: u64) -> Result<f64> {
    let n = oracle.dim();
    if n == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let g0 = oracle.grad(x0);
    if !all_finite(&g0) {
        return Err(Error::NonFiniteOracle);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut est = oracle.lipschitz_hint().unwrap_or(0.0);
    for _ in 0..LIPSCHITZ_PROBES {
        let mut u: Vector = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nu = norm(&u);
        if nu == 0.0 {
            continue;
        }
        u /= nu;
        let xp = x0 + &(&u * LIPSCHITZ_STEP);
        let g1 = oracle.grad(&xp);
        if !all_finite(&g1) {
            return Err(Error::NonFiniteOracle);
        }
        est = est.max(norm(&(&g1 - &g0)) / LIPSCHITZ_STEP);
    }
    Ok(est.max(LIPSCHITZ_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    struct NegSquare;

    impl SmoothOracle for NegSquare {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &Vector) -> f64 {
            -x.dot(x)
        }
        fn grad(&self, x: &Vector) -> Vector {
            x * -2.0
        }
        fn hvp(&self, _x: &Vector, v: &Vector) -> Vector {
            v * -2.0
        }
    }

    struct Zero(usize);

    impl SmoothOracle for Zero {
        fn dim(&self) -> usize {
            self.0
        }
        fn eval(&self, _x: &Vector) -> f64 {
            0.0
        }
        fn grad(&self, _x: &Vector) -> Vector {
            Vector::zeros(self.0)
        }
        fn hvp(&self, _x: &Vector, _v: &Vector) -> Vector {
            Vector::zeros(self.0)
        }
    }

    struct Broken;

    impl SmoothOracle for Broken {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _x: &Vector) -> f64 {
            f64::NAN
        }
        fn grad(&self, _x: &Vector) -> Vector {
            array![f64::NAN]
        }
        fn hvp(&self, _x: &Vector, v: &Vector) -> Vector {
            v.clone()
        }
    }

    #[test]
    fn counters_start_at_zero() {
        let c = Counters::new();
        assert_eq!(c.snapshot(), CallCounters::default());
    }

    #[test]
    fn grad_calls_are_counted() {
        let c = Counters::new();
        let f = NegSquare;
        let w = wrap_smooth(&f, &c);
        let x = array![1.0, 2.0];
        for _ in 0..3 {
            w.grad(&x);
        }
        let s = c.snapshot();
        assert_eq!(s.grad_f, 3);
        assert_eq!(s.eval_f + s.hvp_f + s.prox_g, 0);
    }

    #[test]
    fn wrapper_is_bit_identical() {
        let c = Counters::new();
        let f = NegSquare;
        let w = wrap_smooth(&f, &c);
        let x = array![0.3, -1.7];
        let v = array![0.1, 0.9];
        assert_eq!(w.hvp(&x, &v), f.hvp(&x, &v));
        assert_eq!(w.eval(&x).to_bits(), f.eval(&x).to_bits());
        assert_eq!(c.snapshot().hvp_f, 1);
        assert_eq!(c.snapshot().eval_f, 1);
    }

    #[test]
    fn lipschitz_of_negative_square_is_two() {
        let l = estimate_lipschitz(&NegSquare, &array![0.1, 0.0], 7).unwrap();
        assert!((l - 2.0).abs() <= 2e-6, "{l}");
    }

    #[test]
    fn lipschitz_of_zero_hits_floor() {
        let l = estimate_lipschitz(&Zero(3), &Vector::zeros(3), 1).unwrap();
        assert_eq!(l, 1e-12);
    }

    #[test]
    fn lipschitz_rejects_nan() {
        let err = estimate_lipschitz(&Broken, &array![0.0], 1).unwrap_err();
        assert_eq!(err.to_string(), "oracle returned non-finite value");
    }
}
