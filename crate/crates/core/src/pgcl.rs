//! Proximal gradient with a curvilinear linesearch along `x̄ + τ²d + τs`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::common::{call_seed, finish, initial_stepsize, point, Finish};
use crate::error::{Error, Result};
use crate::fbe::{
    adapt_state, fbe_eval, fbe_grad, sigma_for, upper_bound_holds, FbeState, GenHessOp,
    DEFAULT_ALPHA,
};
use crate::linalg::{axpy, norm, norm_inf, LinearOperator, Vector};
use crate::oracles::{wrap_nonsmooth, wrap_smooth, Composite, Counters};
use crate::report::{Certificate, SolverRun, Status, TrajectoryPoint};
use crate::subsolvers::{
    cg_tolerance, lanczos_min_eig, lbfgs_direction, EigEstimate, LbfgsBuffer, LBFGS_CAPACITY,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    NewtonCg,
    Lbfgs,
}

impl FromStr for DirectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton_cg" => Ok(Self::NewtonCg),
            "lbfgs" => Ok(Self::Lbfgs),
            other => Err(Error::InvalidConfig(format!(
                "unknown direction mode {other}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgclConfig {
    pub gamma0: Option<f64>,
    /// `σ = σ_factor · γ(1 − γL̂)/2`.
    pub sigma_factor: f64,
    pub beta: f64,
    pub mu: f64,
    pub sbar: f64,
    pub direction_mode: DirectionMode,
    pub tol_r: f64,
    pub tol_lambda: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub alpha: f64,
    pub lanczos_max_iter: usize,
    pub lanczos_tol: f64,
    pub record_trajectory: bool,
}

impl Default for PgclConfig {
    fn default() -> Self {
        Self {
            gamma0: None,
            sigma_factor: std::f64::consts::FRAC_1_SQRT_2,
            beta: std::f64::consts::FRAC_1_SQRT_2,
            mu: 0.1,
            sbar: 1.0,
            direction_mode: DirectionMode::NewtonCg,
            tol_r: 1e-10,
            tol_lambda: 1e-10,
            max_iter: 2000,
            max_backtracks: 60,
            alpha: DEFAULT_ALPHA,
            lanczos_max_iter: 50,
            lanczos_tol: 1e-8,
            record_trajectory: false,
        }
    }
}

impl PgclConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if let Some(g) = self.gamma0 {
            if !(g > 0.0 && g.is_finite()) {
                return bad("gamma0 must be positive");
            }
        }
        let unit = |v: f64| 0.0 < v && v < 1.0;
        if !unit(self.sigma_factor) || !unit(self.beta) || !unit(self.mu) {
            return bad("sigma_factor, beta and mu must lie in (0, 1)");
        }
        if !(self.sbar > 0.0 && self.sbar.is_finite()) {
            return bad("sbar must be positive");
        }
        if !(self.tol_r > 0.0 && self.tol_lambda > 0.0) {
            return bad("tolerances must be positive");
        }
        if !unit(self.alpha) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.lanczos_max_iter == 0 {
            return bad("lanczos_max_iter must be positive");
        }
        Ok(())
    }
}

/// Fast direction `d` and scaled negative-curvature direction `s` at `x̄`.
#[derive(Clone, Debug)]
pub struct DirectionPair {
    pub d: Vector,
    pub s: Vector,
    /// `⟨Bs, s⟩`
    pub curvature: f64,
    pub d_descent: bool,
    pub s_descent: bool,
}

impl DirectionPair {
    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|v| *v == 0.0) && self.s.iter().all(|v| *v == 0.0)
    }
}

/// Plain CG on `B d = −g` stopped at `‖residual‖ ≤ eps`. On nonpositive curvature the
/// current iterate is returned, or `−g` if none has been formed yet.
pub fn truncated_cg(grad: &Vector, op: &dyn LinearOperator, eps: f64, max_iter: usize) -> Vector {
    let mut d = Vector::zeros(grad.len());
    let mut r = grad.clone();
    let mut rr = r.dot(&r);
    if rr.sqrt() <= eps {
        return d;
    }
    let mut p = -&r;
    for it in 0..max_iter {
        let bp = op.apply(&p);
        let curv = p.dot(&bp);
        if curv <= 0.0 {
            return if it == 0 { -grad } else { d };
        }
        let a = rr / curv;
        axpy(a, &p, &mut d);
        axpy(a, &bp, &mut r);
        let next = r.dot(&r);
        if next.sqrt() <= eps {
            break;
        }
        p = &(&p * (next / rr)) - &r;
        rr = next;
    }
    d
}

/// Build the direction pair. `qr` is `∇φ_γ(x̄) = Q r̄`; `fast` is the unsigned fast
/// direction (newton-CG or L-BFGS), which gets its sign fixed here.
pub fn pgcl_directions(
    qr: &Vector,
    fast: Vector,
    eig: &EigEstimate,
    config: &PgclConfig,
) -> DirectionPair {
    let n = qr.len();
    let d = if qr.dot(&fast) > 0.0 { -fast } else { fast };
    let (s, curvature) = if eig.lambda_min < -config.tol_lambda {
        let lambda = eig.lambda_min;
        let scale = config.sbar * (-lambda).sqrt() * (1.0 / norm(qr)).min(1.0);
        let sign = if qr.dot(&eig.v) > 0.0 { -1.0 } else { 1.0 };
        (&eig.v * (sign * scale), scale * scale * lambda)
    } else {
        (Vector::zeros(n), 0.0)
    };
    DirectionPair {
        d_descent: qr.dot(&d) <= 0.0,
        s_descent: qr.dot(&s) <= 0.0,
        d,
        s,
        curvature,
    }
}

/// Linesearch result.
#[derive(Clone, Debug)]
pub enum LinesearchOutcome {
    /// Step accepted; `next` is the envelope state there, at the input stepsize.
    Accepted { tau: f64, next: FbeState },
    /// Only trials where the quadratic upper bound of `f` fails passed the decrease
    /// test; the iteration restarts with this smaller stepsize.
    ShrinkStepsize { gamma: f64 },
}

/// Backtrack `τ = 1, β, β², …` on the curvilinear path, falling back to `x̄` with `τ = 0`.
///
/// A trial only counts where the quadratic upper bound of `f` holds at the current
/// stepsize. If the search falls back to `x̄` after some trial was refused for that
/// reason, the stepsize valid at the closest such trial is returned instead.
pub fn pgcl_linesearch(
    state: &FbeState,
    state_bar: &FbeState,
    pair: &DirectionPair,
    sigma: f64,
    config: &PgclConfig,
    problem: &Composite<'_>,
) -> Result<LinesearchOutcome> {
    if pair.is_zero() {
        return Ok(LinesearchOutcome::Accepted {
            tau: 1.0,
            next: state_bar.clone(),
        });
    }
    let base = state.fbe - sigma * state.residual_sq();
    let mut tau = 1.0;
    let mut refused = None;
    for _ in 0..config.max_backtracks {
        let mut x = state_bar.x.clone();
        axpy(tau * tau, &pair.d, &mut x);
        axpy(tau, &pair.s, &mut x);
        match fbe_eval(&x, state.gamma, problem) {
            Ok(c) if c.fbe <= base + 0.5 * config.mu * tau * tau * pair.curvature => {
                if upper_bound_holds(&c, problem, config.alpha)? {
                    return Ok(LinesearchOutcome::Accepted { tau, next: c });
                }
                refused = Some(c);
            }
            Ok(_) | Err(Error::NonFiniteObjective) => {}
            Err(e) => return Err(e),
        }
        tau *= config.beta;
    }
    if let Some(c) = refused {
        let (gamma, _) = adapt_state(c, problem, config.alpha)?;
        return Ok(LinesearchOutcome::ShrinkStepsize { gamma });
    }
    Ok(LinesearchOutcome::Accepted {
        tau: 0.0,
        next: state_bar.clone(),
    })
}

/// Run the curvilinear-linesearch method from `x0`.
pub fn pgcl_solve(
    problem: Composite<'_>,
    x0: &Vector,
    config: &PgclConfig,
    seed: u64,
) -> Result<SolverRun> {
    config.validate()?;
    let counters = Counters::new();
    let fs = wrap_smooth(problem.smooth, &counters);
    let gs = wrap_nonsmooth(problem.nonsmooth, &counters);
    let p = Composite::new(&fs, &gs);

    let (lhat, gamma0) = initial_stepsize(&p, x0, config.gamma0, seed)?;
    let (_, mut state) = adapt_state(fbe_eval(x0, gamma0, &p)?, &p, config.alpha)?;
    let mut trajectory: Option<Vec<TrajectoryPoint>> = config.record_trajectory.then(Vec::new);
    let mut buffer = LbfgsBuffer::new(LBFGS_CAPACITY);
    let mut previous: Option<(Vector, Vector, f64)> = None;
    let mut status = Status::BudgetExhausted;
    let mut iterations = 0;
    let mut certificate = None;
    let mut last_bar = None;

    for k in 0..=config.max_iter {
        iterations = k;
        let sbar = fbe_eval(&state.xbar, state.gamma, &p)?;
        let qr = fbe_grad(&sbar, &p);
        let op = GenHessOp::new(&sbar, p);
        let eig = lanczos_min_eig(
            &op,
            config.lanczos_max_iter,
            config.lanczos_tol,
            call_seed(seed, k),
        );
        certificate = Some(Certificate {
            residual_inf: sbar.residual_inf(),
            lambda_min_estimate: eig.lambda_min,
            eig_residual: eig.residual,
        });
        let mut pt = point(k, &state);
        let stationary =
            sbar.residual_inf() <= config.tol_r && eig.certified_lower() >= -config.tol_lambda;
        if stationary || k == config.max_iter {
            if stationary {
                status = Status::SecondOrderStationary;
            }
            if let Some(t) = trajectory.as_mut() {
                t.push(pt);
            }
            last_bar = Some(sbar);
            break;
        }

        let fast = match config.direction_mode {
            DirectionMode::NewtonCg => {
                let eps = cg_tolerance(norm_inf(&qr));
                truncated_cg(&qr, &op, eps, 2 * op.dim() + 10)
            }
            DirectionMode::Lbfgs => {
                if let Some((xp, gp, gamma)) = previous.take() {
                    if gamma == sbar.gamma {
                        buffer.push(&sbar.x - &xp, &qr - &gp);
                    } else {
                        buffer.clear();
                    }
                }
                previous = Some((sbar.x.clone(), qr.clone(), sbar.gamma));
                lbfgs_direction(&buffer, &qr)
            }
        };
        let pair = pgcl_directions(&qr, fast, &eig, config);
        let sigma = sigma_for(state.gamma, lhat, config.alpha, config.sigma_factor);
        let next = match pgcl_linesearch(&state, &sbar, &pair, sigma, config, &p)? {
            LinesearchOutcome::Accepted { tau, next } => {
                pt.tau = Some(tau);
                pt.sigma = Some(sigma);
                pt.residual_sq = Some(state.residual_sq());
                pt.curvature = Some(pair.curvature);
                next
            }
            LinesearchOutcome::ShrinkStepsize { gamma } => fbe_eval(&state.x, gamma, &p)?,
        };
        if let Some(t) = trajectory.as_mut() {
            t.push(pt);
        }
        state = adapt_state(next, &p, config.alpha)?.1;
    }

    let bar = last_bar.expect("loop always records the final backward state");
    Ok(finish(
        &p,
        &counters,
        Finish {
            status,
            final_point: Some(bar.x.clone()),
            state: &bar,
            certificate,
            iterations,
            trajectory,
        },
    ))
}
