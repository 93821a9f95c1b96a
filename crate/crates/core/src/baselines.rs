//! First-order comparators: plain proximal gradient and a PANOC-style method.

use crate::common::{finish, initial_stepsize, point, Finish};
use crate::error::{Error, Result};
use crate::fbe::{adapt_state, fbe_eval, sigma_for, FbeState, DEFAULT_ALPHA};
use crate::linalg::{axpy, Vector};
use crate::oracles::{wrap_nonsmooth, wrap_smooth, Composite, Counters};
use crate::report::{SolverRun, Status, TrajectoryPoint};
use crate::subsolvers::{lbfgs_direction, LbfgsBuffer, LBFGS_CAPACITY};

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub gamma0: Option<f64>,
    pub tol_r: f64,
    pub max_iter: usize,
    pub lbfgs_capacity: usize,
    pub alpha: f64,
    /// PANOC decrease `σ = σ_factor · γ(1 − γL̂)/2`.
    pub sigma_factor: f64,
    pub max_backtracks: usize,
    pub record_trajectory: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            gamma0: None,
            tol_r: 1e-10,
            max_iter: 10_000,
            lbfgs_capacity: LBFGS_CAPACITY,
            alpha: DEFAULT_ALPHA,
            sigma_factor: std::f64::consts::FRAC_1_SQRT_2,
            max_backtracks: 60,
            record_trajectory: false,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if let Some(g) = self.gamma0 {
            if !(g > 0.0 && g.is_finite()) {
                return bad("gamma0 must be positive");
            }
        }
        if !(self.tol_r > 0.0) {
            return bad("tol_r must be positive");
        }
        if self.lbfgs_capacity == 0 {
            return bad("lbfgs_capacity must be positive");
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(0.0 < self.sigma_factor && self.sigma_factor < 1.0) {
            return bad("sigma_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

fn push(trajectory: &mut Option<Vec<TrajectoryPoint>>, pt: TrajectoryPoint) {
    if let Some(t) = trajectory.as_mut() {
        t.push(pt);
    }
}

/// Proximal gradient method `x⁺ = prox_{γg}(x − γ∇f(x))` with the adaptive stepsize.
pub fn pgm_solve(
    problem: Composite<'_>,
    x0: &Vector,
    config: &BaselineConfig,
    seed: u64,
) -> Result<SolverRun> {
    config.validate()?;
    let counters = Counters::new();
    let fs = wrap_smooth(problem.smooth, &counters);
    let gs = wrap_nonsmooth(problem.nonsmooth, &counters);
    let p = Composite::new(&fs, &gs);

    let (_, gamma0) = initial_stepsize(&p, x0, config.gamma0, seed)?;
    let (_, mut state) = adapt_state(fbe_eval(x0, gamma0, &p)?, &p, config.alpha)?;
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut status = Status::BudgetExhausted;
    let mut iterations = 0;
    for k in 0..=config.max_iter {
        iterations = k;
        push(&mut trajectory, point(k, &state));
        if state.residual_inf() <= config.tol_r {
            status = Status::FirstOrderStationary;
            break;
        }
        if k == config.max_iter {
            break;
        }
        let next = fbe_eval(&state.xbar, state.gamma, &p)?;
        state = adapt_state(next, &p, config.alpha)?.1;
    }
    Ok(finish(
        &p,
        &counters,
        Finish {
            status,
            state: &state,
            final_point: None,
            certificate: None,
            iterations,
            trajectory,
        },
    ))
}

/// One PANOC linesearch: `x⁺ = x − (1 − τ)γr + τd`, `τ = 1, ½, …`, falling back to
/// the proximal gradient point when no `τ > 0` passes. Returns `(τ, state at x⁺)`.
pub fn panoc_linesearch(
    state: &FbeState,
    d: &Vector,
    sigma: f64,
    max_backtracks: usize,
    problem: &Composite<'_>,
) -> Result<(f64, FbeState)> {
    let gr = &state.x - &state.xbar;
    let target = state.fbe - sigma * state.residual_sq();
    let mut tau = 1.0;
    for _ in 0..max_backtracks {
        let mut x = state.x.clone();
        axpy(-(1.0 - tau), &gr, &mut x);
        axpy(tau, d, &mut x);
        match fbe_eval(&x, state.gamma, problem) {
            Ok(c) if c.fbe <= target => return Ok((tau, c)),
            Ok(_) | Err(Error::NonFiniteObjective) => {}
            Err(e) => return Err(e),
        }
        tau *= 0.5;
    }
    Ok((0.0, fbe_eval(&state.xbar, state.gamma, problem)?))
}

/// PANOC-style method: L-BFGS directions on the fixed-point residual, globalized by
/// a backtracking linesearch on the envelope.
pub fn panoc_solve(
    problem: Composite<'_>,
    x0: &Vector,
    config: &BaselineConfig,
    seed: u64,
) -> Result<SolverRun> {
    config.validate()?;
    let counters = Counters::new();
    let fs = wrap_smooth(problem.smooth, &counters);
    let gs = wrap_nonsmooth(problem.nonsmooth, &counters);
    let p = Composite::new(&fs, &gs);

    let (lhat, gamma0) = initial_stepsize(&p, x0, config.gamma0, seed)?;
    let (_, mut state) = adapt_state(fbe_eval(x0, gamma0, &p)?, &p, config.alpha)?;
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut buffer = LbfgsBuffer::new(config.lbfgs_capacity);
    let mut previous: Option<(Vector, Vector, f64)> = None;
    let mut status = Status::BudgetExhausted;
    let mut iterations = 0;
    for k in 0..=config.max_iter {
        iterations = k;
        let mut pt = point(k, &state);
        if state.residual_inf() <= config.tol_r || k == config.max_iter {
            if state.residual_inf() <= config.tol_r {
                status = Status::FirstOrderStationary;
            }
            push(&mut trajectory, pt);
            break;
        }
        let gr = &state.x - &state.xbar;
        if let Some((xp, grp, gamma)) = previous.take() {
            if gamma == state.gamma {
                buffer.push(&state.x - &xp, &gr - &grp);
            } else {
                buffer.clear();
            }
        }
        let d = lbfgs_direction(&buffer, &gr);
        previous = Some((state.x.clone(), gr, state.gamma));
        let sigma = sigma_for(state.gamma, lhat, config.alpha, config.sigma_factor);
        let (tau, next) = panoc_linesearch(&state, &d, sigma, config.max_backtracks, &p)?;
        pt.tau = Some(tau);
        pt.sigma = Some(sigma);
        pt.residual_sq = Some(state.residual_sq());
        push(&mut trajectory, pt);
        state = adapt_state(next, &p, config.alpha)?.1;
    }
    Ok(finish(
        &p,
        &counters,
        Finish {
            status,
            state: &state,
            final_point: None,
            certificate: None,
            iterations,
            trajectory,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::oracles::SmoothOracle;
    use crate::problems::{toy_box, ToyVariant};
    use crate::prox::ProxSpec;
    use ndarray::{array, Array2};

    struct Quadratic(Array2<f64>, Vector);

    impl SmoothOracle for Quadratic {
        fn dim(&self) -> usize {
            self.1.len()
        }
        fn eval(&self, x: &Vector) -> f64 {
            0.5 * x.dot(&self.0.dot(x)) - self.1.dot(x)
        }
        fn grad(&self, x: &Vector) -> Vector {
            self.0.dot(x) - &self.1
        }
        fn hvp(&self, _x: &Vector, v: &Vector) -> Vector {
            self.0.dot(v)
        }
        fn lipschitz_hint(&self) -> Option<f64> {
            Some(10.0)
        }
    }

    fn traced() -> BaselineConfig {
        BaselineConfig {
            record_trajectory: true,
            ..BaselineConfig::default()
        }
    }

    #[test]
    fn pgm_stops_at_toy_saddle() {
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        let run = pgm_solve(inst.composite(), &array![0.1, 0.0], &traced(), 0).unwrap();
        assert_eq!(run.status, Status::FirstOrderStationary);
        assert!(norm(&(&run.final_point - &array![1.0, 0.0])) <= 1e-6);
        assert!(run.certificate.is_none());
        let t = run.trajectory.unwrap();
        for w in t.windows(2) {
            assert!(w[1].fbe <= w[0].fbe);
        }
    }

    #[test]
    fn pgm_on_l1_toy_contracts_to_origin() {
        // With g = |x| + box, |x⁺| = (1 + 2γ)|x| − γ while |x| < 1, whose repelling fixed
        // point is |x| = 1/2 for every γ; starting at 0.4 the iterates shrink to zero.
        let inst = toy_box(ToyVariant::L1Box).unwrap();
        let run = pgm_solve(inst.composite(), &array![-0.4, 0.0], &traced(), 0).unwrap();
        assert_eq!(run.status, Status::FirstOrderStationary);
        assert!(norm(&run.final_point) <= 1e-6);
    }

    #[test]
    fn fixed_point_start_stops_immediately() {
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        for x0 in [array![1.0, 0.0], array![1.0, 1.0]] {
            let c = BaselineConfig::default();
            assert_eq!(
                pgm_solve(inst.composite(), &x0, &c, 0).unwrap().iterations,
                0
            );
            assert_eq!(
                panoc_solve(inst.composite(), &x0, &c, 0)
                    .unwrap()
                    .iterations,
                0
            );
        }
    }

    #[test]
    fn panoc_beats_pgm_on_convex_quadratic() {
        let h = Array2::from_shape_fn((6, 6), |(i, j)| {
            if i == j {
                1.0 + i as f64 * 1.5
            } else {
                0.2 / (1.0 + (i as f64 - j as f64).abs())
            }
        });
        let f = Quadratic(h, array![3.0, -2.0, 1.0, 0.5, -4.0, 2.0]);
        let g = ProxSpec::boxed(Vector::from_elem(6, -0.5), Vector::from_elem(6, 0.5)).unwrap();
        let p = Composite::new(&f, &g);
        let x0 = Vector::zeros(6);
        let c = BaselineConfig::default();
        let pgm = pgm_solve(p, &x0, &c, 3).unwrap();
        let panoc = panoc_solve(p, &x0, &c, 3).unwrap();
        assert!(panoc.residual_inf <= c.tol_r);
        assert!(panoc.iterations <= pgm.iterations);
    }

    #[test]
    fn panoc_toy_is_first_order_and_monotone() {
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        let run = panoc_solve(inst.composite(), &array![0.1, 0.0], &traced(), 0).unwrap();
        assert_eq!(run.status, Status::FirstOrderStationary);
        assert!(run.residual_inf <= 1e-10);
        let t = run.trajectory.unwrap();
        for w in t.windows(2) {
            if w[0].gamma == w[1].gamma {
                let bound = w[0].fbe - w[0].sigma.unwrap() * w[0].residual_sq.unwrap();
                assert!(w[1].fbe <= bound + 1e-15);
            }
        }
    }

    #[test]
    fn empty_buffer_fallback_is_pg_step() {
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        let p = inst.composite();
        let state = fbe_eval(&array![0.3, -0.2], 0.25, &p).unwrap();
        let d = lbfgs_direction(&LbfgsBuffer::default(), &(&state.x - &state.xbar));
        // A zero budget forces the fallback.
        let (tau, next) = panoc_linesearch(&state, &d, 0.01, 0, &p).unwrap();
        assert_eq!(tau, 0.0);
        assert_eq!(next.x, state.xbar);
        // With budget, τ = 1 already lands on the same point.
        let (tau, next) = panoc_linesearch(&state, &d, 0.01, 10, &p).unwrap();
        assert_eq!(tau, 1.0);
        assert!(norm(&(&next.x - &state.xbar)) < 1e-15);
    }
}
