//! Nonsmooth trust-region method on the forward-backward envelope.

use crate::common::{call_seed, finish, initial_stepsize, point, Finish};
use crate::error::{Error, Result};
use crate::fbe::{
    adapt_state, fbe_eval, fbe_grad, rounding_slack, upper_bound_holds, FbeState, GenHessOp,
    DEFAULT_ALPHA,
};
use crate::linalg::{norm_inf, LinearOperator, Vector};
use crate::oracles::{wrap_nonsmooth, wrap_smooth, Composite, Counters};
use crate::report::{Certificate, SolverRun, Status, TrajectoryPoint};
use crate::subsolvers::{
    cg_tolerance, curvature_safeguard, lanczos_min_eig, steihaug_cg, EigEstimate, TrStep,
};

#[derive(Clone, Debug, PartialEq)]
pub struct NtraConfig {
    /// Initial stepsize; `None` uses `0.9/L̂`.
    pub gamma0: Option<f64>,
    pub delta0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub tol_r: f64,
    pub tol_lambda: f64,
    pub max_iter: usize,
    pub beta2: f64,
    pub alpha: f64,
    pub lanczos_max_iter: usize,
    pub lanczos_tol: f64,
    pub record_trajectory: bool,
}

impl Default for NtraConfig {
    fn default() -> Self {
        Self {
            gamma0: None,
            delta0: 1.0,
            mu1: 0.5,
            mu2: 0.7,
            c1: 0.35,
            c2: 1.0,
            c3: 1.5,
            tol_r: 1e-10,
            tol_lambda: 1e-10,
            max_iter: 2000,
            beta2: 0.25,
            alpha: DEFAULT_ALPHA,
            lanczos_max_iter: 50,
            lanczos_tol: 1e-8,
            record_trajectory: false,
        }
    }
}

impl NtraConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if let Some(g) = self.gamma0 {
            if !(g > 0.0 && g.is_finite()) {
                return bad("gamma0 must be positive");
            }
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return bad("delta0 must be positive");
        }
        if !(0.0 < self.mu1 && self.mu1 < self.mu2 && self.mu2 < 1.0) {
            return bad("need 0 < mu1 < mu2 < 1");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 <= 1.0 && 1.0 < self.c3) {
            return bad("need 0 < c1 < c2 <= 1 < c3");
        }
        if !(self.tol_r > 0.0 && self.tol_lambda > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.beta2 > 0.0) {
            return bad("beta2 must be positive");
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.lanczos_max_iter == 0 {
            return bad("lanczos_max_iter must be positive");
        }
        Ok(())
    }
}

/// Radius rule: shrink by `c1` below `μ1`, keep `c2` up to `μ2`, expand by `c3` above.
pub fn radius_update(rho: f64, delta: f64, config: &NtraConfig) -> f64 {
    if rho < config.mu1 {
        config.c1 * delta
    } else if rho < config.mu2 {
        config.c2 * delta
    } else {
        config.c3 * delta
    }
}

/// Ratio of actual to predicted reduction. When both are at rounding level the
/// model is taken as exact.
pub fn reduction_ratio(actual: f64, predicted: f64, fbe: f64) -> f64 {
    let noise = rounding_slack(fbe);
    if actual.abs() <= noise && predicted.abs() <= noise {
        1.0
    } else {
        actual / predicted
    }
}

/// Outcome of one trust-region step.
#[derive(Clone, Debug)]
pub struct NtraStep {
    pub tr: TrStep,
    pub rho: f64,
    pub accepted: bool,
    pub delta_next: f64,
    /// Evaluated `x + d` when accepted.
    pub candidate: Option<FbeState>,
    /// Smaller stepsize to restart from `x` with, when the quadratic upper bound of
    /// `f` failed at the otherwise acceptable candidate.
    pub restart_gamma: Option<f64>,
}

impl NtraStep {
    /// New iterate: `x + d` if accepted, `x` otherwise.
    pub fn next_point(&self, state: &FbeState) -> Vector {
        match &self.candidate {
            Some(c) => c.x.clone(),
            None => state.x.clone(),
        }
    }
}

/// Solve the model subproblem, evaluate the candidate and apply the ratio test.
pub fn ntra_step(
    state: &FbeState,
    grad: &Vector,
    op: &dyn LinearOperator,
    eig: &EigEstimate,
    delta: f64,
    config: &NtraConfig,
    problem: &Composite<'_>,
) -> Result<NtraStep> {
    let eps = cg_tolerance(norm_inf(grad));
    let cg_max = 2 * op.dim() + 10;
    let tr = steihaug_cg(grad, op, delta, eps, cg_max);
    let tr = curvature_safeguard(tr, grad, delta, eig, config.beta2);
    if !(tr.model_decrease > 0.0) {
        return Err(Error::SubsolverContract);
    }
    let xc = &state.x + &tr.d;
    let (rho, mut cand) = match fbe_eval(&xc, state.gamma, problem) {
        Ok(c) => (
            reduction_ratio(state.fbe - c.fbe, tr.model_decrease, state.fbe),
            Some(c),
        ),
        Err(Error::NonFiniteObjective) => (f64::NEG_INFINITY, None),
        Err(e) => return Err(e),
    };
    let mut restart_gamma = None;
    if let Some(c) = cand.take() {
        if rho >= config.mu1 && c.fbe <= state.fbe + rounding_slack(state.fbe) {
            if upper_bound_holds(&c, problem, config.alpha)? {
                cand = Some(c);
            } else {
                // The stepsize is too large where the step lands.
                restart_gamma = Some(adapt_state(c, problem, config.alpha)?.0);
            }
        }
    }
    let accepted = rho >= config.mu1 && cand.is_some();
    Ok(NtraStep {
        delta_next: if restart_gamma.is_some() {
            delta
        } else {
            radius_update(rho, delta, config)
        },
        rho,
        accepted,
        candidate: if accepted { cand } else { None },
        restart_gamma,
        tr,
    })
}

/// Run the trust-region method from `x0`. Oracles are wrapped with fresh counters.
pub fn ntra_solve(
    problem: Composite<'_>,
    x0: &Vector,
    config: &NtraConfig,
    seed: u64,
) -> Result<SolverRun> {
    config.validate()?;
    let counters = Counters::new();
    let fs = wrap_smooth(problem.smooth, &counters);
    let gs = wrap_nonsmooth(problem.nonsmooth, &counters);
    let p = Composite::new(&fs, &gs);

    let (_, gamma0) = initial_stepsize(&p, x0, config.gamma0, seed)?;
    let (_, mut state) = adapt_state(fbe_eval(x0, gamma0, &p)?, &p, config.alpha)?;
    let mut delta = config.delta0;
    let mut trajectory: Option<Vec<TrajectoryPoint>> = config.record_trajectory.then(Vec::new);
    let mut cached: Option<(Vector, EigEstimate)> = None;
    let mut certificate = None;
    let mut status = Status::BudgetExhausted;
    let mut iterations = 0;
    let mut lanczos_calls = 0;

    for k in 0..=config.max_iter {
        iterations = k;
        let (grad, eig) = match cached.take() {
            Some(c) => c,
            None => {
                let grad = fbe_grad(&state, &p);
                let op = GenHessOp::new(&state, p);
                let eig = lanczos_min_eig(
                    &op,
                    config.lanczos_max_iter,
                    config.lanczos_tol,
                    call_seed(seed, lanczos_calls),
                );
                lanczos_calls += 1;
                (grad, eig)
            }
        };
        let res_inf = state.residual_inf();
        certificate = Some(Certificate {
            residual_inf: res_inf,
            lambda_min_estimate: eig.lambda_min,
            eig_residual: eig.residual,
        });
        let mut pt = point(k, &state);
        if res_inf <= config.tol_r && eig.certified_lower() >= -config.tol_lambda {
            status = Status::SecondOrderStationary;
            if let Some(t) = trajectory.as_mut() {
                t.push(pt);
            }
            break;
        }
        if k == config.max_iter {
            if let Some(t) = trajectory.as_mut() {
                t.push(pt);
            }
            break;
        }
        let op = GenHessOp::new(&state, p);
        let step = match ntra_step(&state, &grad, &op, &eig, delta, config, &p) {
            Ok(s) => s,
            Err(Error::SubsolverContract) if res_inf <= config.tol_r => {
                status = Status::FirstOrderStationary;
                if let Some(t) = trajectory.as_mut() {
                    t.push(pt);
                }
                break;
            }
            Err(e) => return Err(e),
        };
        pt.rho = Some(step.rho);
        pt.accepted = Some(step.accepted);
        if let Some(t) = trajectory.as_mut() {
            t.push(pt);
        }
        delta = step.delta_next;
        match (step.candidate, step.restart_gamma) {
            (Some(c), _) => state = c,
            (None, Some(gamma)) => {
                state = adapt_state(fbe_eval(&state.x, gamma, &p)?, &p, config.alpha)?.1;
            }
            (None, None) => cached = Some((grad, eig)),
        }
    }

    Ok(finish(
        &p,
        &counters,
        Finish {
            status,
            state: &state,
            final_point: None,
            certificate,
            iterations,
            trajectory,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::problems::{sparse_pca, toy_box, ToyVariant};
    use ndarray::array;

    fn cfg() -> NtraConfig {
        NtraConfig::default()
    }

    #[test]
    fn radius_rule_constants() {
        let c = cfg();
        assert_eq!(radius_update(0.9, 2.0, &c), 3.0);
        assert_eq!(radius_update(0.3, 2.0, &c), 0.7);
        assert_eq!(radius_update(0.6, 2.0, &c), 2.0);
        // Tie at mu1 counts as success.
        assert_eq!(radius_update(0.5, 2.0, &c), 2.0);
    }

    #[test]
    fn config_ordering_is_checked() {
        assert!(cfg().validate().is_ok());
        let mut c = cfg();
        c.mu1 = 0.8;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.c3 = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.gamma0 = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn starts_at_minimizer_and_stops() {
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        let c = NtraConfig {
            gamma0: Some(0.25),
            ..cfg()
        };
        let run = ntra_solve(inst.composite(), &array![1.0, 1.0], &c, 0).unwrap();
        assert_eq!(run.iterations, 0);
        assert_eq!(run.status, Status::SecondOrderStationary);
        let cert = run.certificate.unwrap();
        assert!((cert.lambda_min_estimate - 6.0).abs() < 1e-12);
    }

    #[test]
    fn toy_escapes_to_corner() {
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        let c = NtraConfig {
            record_trajectory: true,
            ..cfg()
        };
        let run = ntra_solve(inst.composite(), &array![0.1, 0.0], &c, 0).unwrap();
        assert_eq!(run.status, Status::SecondOrderStationary);
        assert!(norm(&(&run.final_point - &array![1.0, 1.0])) <= 1e-6);
        assert!(run.certificate.unwrap().lambda_min_estimate >= -1e-10);
        let traj = run.trajectory.unwrap();
        for w in traj.windows(2) {
            assert!(w[1].fbe <= w[0].fbe);
        }
    }

    #[test]
    fn one_step_from_saddle_decreases() {
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        let p = inst.composite();
        let state = fbe_eval(&array![1.0, 0.0], 0.25, &p).unwrap();
        let grad = fbe_grad(&state, &p);
        let op = GenHessOp::new(&state, p);
        let eig = lanczos_min_eig(&op, 50, 1e-8, 3);
        assert!((eig.lambda_min + 3.0).abs() < 1e-12);
        let step = ntra_step(&state, &grad, &op, &eig, 1.0, &cfg(), &p).unwrap();
        assert!(step.accepted);
        assert!(step.candidate.unwrap().fbe < state.fbe);
    }

    #[test]
    fn rejected_step_keeps_point_and_shrinks() {
        // A wildly large radius on the concave toy overshoots the box and is rejected.
        let inst = toy_box(ToyVariant::QuadraticBox).unwrap();
        let p = inst.composite();
        let state = fbe_eval(&array![0.5, 0.2], 0.25, &p).unwrap();
        let grad = fbe_grad(&state, &p);
        let op = GenHessOp::new(&state, p);
        let eig = lanczos_min_eig(&op, 50, 1e-8, 3);
        let step = ntra_step(&state, &grad, &op, &eig, 100.0, &cfg(), &p).unwrap();
        assert!(!step.accepted);
        assert_eq!(step.next_point(&state), state.x);
        assert!((step.delta_next - 35.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_model_is_exact_away_from_kinks() {
        let inst = sparse_pca(20, 1e-2, 0.3, 5).unwrap();
        let p = inst.composite();
        // A small interior point with a tiny stepsize keeps x̄ in the smooth region
        // of the ℓ1-ball prox for a short step.
        let mut x = Vector::from_elem(20, 0.01);
        x[0] = 0.1;
        let gamma = 1e-4;
        let state = fbe_eval(&x, gamma, &p).unwrap();
        let grad = fbe_grad(&state, &p);
        let op = GenHessOp::new(&state, p);
        let eig = lanczos_min_eig(&op, 50, 1e-8, 3);
        let delta = 1e-6;
        let step = ntra_step(&state, &grad, &op, &eig, delta, &cfg(), &p).unwrap();
        let c = fbe_eval(&(&state.x + &step.tr.d), gamma, &p).unwrap();
        let actual = state.fbe - c.fbe;
        assert!(
            (actual / step.tr.model_decrease - 1.0).abs() <= 1e-6,
            "ratio {}",
            actual / step.tr.model_decrease
        );
    }

    #[test]
    fn sparse_pca_converges_monotonically() {
        let inst = sparse_pca(60, 1e-2, 0.1, 11).unwrap();
        let x0 = Vector::from_elem(60, 0.05);
        let c = NtraConfig {
            record_trajectory: true,
            ..cfg()
        };
        let run = ntra_solve(inst.composite(), &x0, &c, 11).unwrap();
        assert_eq!(run.status, Status::SecondOrderStationary);
        assert!(run.residual_inf <= 1e-10);
        let traj = run.trajectory.unwrap();
        for w in traj.windows(2) {
            assert!(w[1].fbe <= w[0].fbe);
        }
    }
}
