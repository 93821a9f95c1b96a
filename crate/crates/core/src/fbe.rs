//! Forward-backward envelope: forward/backward steps, fixed-point residual,
//! envelope value and gradient, the matrix-free generalized Hessian, and the
//! adaptive stepsize rule.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, LinearOperator, Vector};
use crate::oracles::Composite;

/// Quadratic-upper-bound factor used by [`adapt_gamma`].
pub const DEFAULT_ALPHA: f64 = 0.95;
/// Fraction of `1/L̂` used as the initial stepsize.
pub const INITIAL_GAMMA_FACTOR: f64 = 0.9;
const MAX_HALVINGS: usize = 60;

/// One iterate evaluated at one stepsize.
#[derive(Clone, Debug)]
pub struct FbeState {
    pub x: Vector,
    pub gamma: f64,
    pub fx: f64,
    pub grad: Vector,
    /// Forward point `x − γ∇f(x)`.
    pub y: Vector,
    /// Backward point `prox_{γg}(y)`.
    pub xbar: Vector,
    pub g_xbar: f64,
    /// Fixed-point residual `(x − x̄)/γ`.
    pub r: Vector,
    pub fbe: f64,
}

impl FbeState {
    pub fn residual_inf(&self) -> f64 {
        crate::linalg::norm_inf(&self.r)
    }

    pub fn residual_sq(&self) -> f64 {
        self.r.dot(&self.r)
    }
}

/// Evaluate the envelope and its building blocks at `x`.
///
/// One call costs one `f`, one `∇f`, one prox and one `g` evaluation.
pub fn fbe_eval(x: &Vector, gamma: f64, problem: &Composite<'_>) -> Result<FbeState> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig("gamma must be positive".into()));
    }
    let fx = problem.smooth.eval(x);
    let grad = problem.smooth.grad(x);
    if !fx.is_finite() || !all_finite(&grad) {
        return Err(Error::NonFiniteObjective);
    }
    let y = x - &(&grad * gamma);
    let xbar = problem.nonsmooth.prox(&y, gamma);
    let g_xbar = problem.nonsmooth.eval(&xbar);
    if !g_xbar.is_finite() || !all_finite(&xbar) {
        return Err(Error::NonFiniteObjective);
    }
    let diff = &xbar - x;
    let fbe = fx + g_xbar + grad.dot(&diff) + diff.dot(&diff) / (2.0 * gamma);
    let r = (x - &xbar) / gamma;
    Ok(FbeState {
        x: x.clone(),
        gamma,
        fx,
        grad,
        y,
        xbar,
        g_xbar,
        r,
        fbe,
    })
}

/// `∇φ_γ(x) = Q r` with `Q = I − γ∇²f(x)`; one Hessian-vector product.
pub fn fbe_grad(state: &FbeState, problem: &Composite<'_>) -> Vector {
    let hr = problem.smooth.hvp(&state.x, &state.r);
    &state.r - &(hr * state.gamma)
}

/// `v ↦ B v` with `B = γ⁻¹ Q (I − P Q)`, never formed explicitly.
pub struct GenHessOp<'s, 'p> {
    state: &'s FbeState,
    problem: Composite<'p>,
}

impl<'s, 'p> GenHessOp<'s, 'p> {
    pub fn new(state: &'s FbeState, problem: Composite<'p>) -> Self {
        Self { state, problem }
    }

    pub fn state(&self) -> &FbeState {
        self.state
    }

    fn q_apply(&self, v: &Vector) -> Vector {
        let hv = self.problem.smooth.hvp(&self.state.x, v);
        v - &(hv * self.state.gamma)
    }
}

impl LinearOperator for GenHessOp<'_, '_> {
    fn dim(&self) -> usize {
        self.state.x.len()
    }

    /// Two Hessian-vector products and one prox Jacobian product.
    fn apply(&self, v: &Vector) -> Vector {
        let gamma = self.state.gamma;
        let qv = self.q_apply(v);
        let pqv = self.problem.nonsmooth.prox_jvp(&self.state.y, gamma, &qv);
        let u = v - &pqv;
        self.q_apply(&u) / gamma
    }
}

/// `B v` for the operator built at `state`.
pub fn genhess_vp(state: &FbeState, problem: &Composite<'_>, v: &Vector) -> Vector {
    GenHessOp::new(state, *problem).apply(v)
}

/// Absolute size of rounding error in envelope and objective values near `v`.
pub fn rounding_slack(v: f64) -> f64 {
    100.0 * f64::EPSILON * (1.0 + v.abs())
}

/// Whether `f(x̄) ≤ f(x) + ⟨∇f(x), x̄ − x⟩ + α/(2γ)‖x̄ − x‖²` holds at `state`.
pub fn upper_bound_holds(state: &FbeState, problem: &Composite<'_>, alpha: f64) -> Result<bool> {
    let f_bar = problem.smooth.eval(&state.xbar);
    if !f_bar.is_finite() {
        return Ok(false);
    }
    let diff = &state.xbar - &state.x;
    let bound = state.fx + state.grad.dot(&diff) + alpha / (2.0 * state.gamma) * diff.dot(&diff);
    Ok(f_bar <= bound + rounding_slack(state.fx))
}

/// Halve `γ` until the quadratic upper bound of `f` holds between `x` and `x̄`.
pub fn adapt_gamma(
    x: &Vector,
    gamma: f64,
    problem: &Composite<'_>,
    alpha: f64,
) -> Result<(f64, FbeState)> {
    let state = fbe_eval(x, gamma, problem)?;
    adapt_state(state, problem, alpha)
}

/// As [`adapt_gamma`] but starting from an already evaluated state.
pub fn adapt_state(
    mut state: FbeState,
    problem: &Composite<'_>,
    alpha: f64,
) -> Result<(f64, FbeState)> {
    let mut halvings = 0;
    loop {
        if upper_bound_holds(&state, problem, alpha)? {
            return Ok((state.gamma, state));
        }
        if halvings == MAX_HALVINGS {
            return Err(Error::StepsizeUnderflow);
        }
        halvings += 1;
        state = fbe_eval(&state.x, state.gamma / 2.0, problem)?;
    }
}

/// Linesearch decrease parameter `σ = factor · γ(1 − γL)/2`, where the effective
/// `γL` is never below `α`, the bound enforced by [`adapt_gamma`].
pub fn sigma_for(gamma: f64, lipschitz: f64, alpha: f64, factor: f64) -> f64 {
    let slack = (1.0 - gamma * lipschitz).min(1.0 - alpha);
    factor * gamma * slack.max(0.0) / 2.0
}
