use crate::linalg::{axpy, norm, LinearOperator, Vector};
use crate::subsolvers::EigEstimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrStatus {
    /// CG converged strictly inside the region.
    InteriorNewton,
    /// A positive-curvature CG step crossed the boundary.
    BoundaryCg,
    /// Nonpositive curvature met; stepped to the boundary.
    BoundaryNegCurv,
    /// The safeguard replaced the CG step by a scaled eigenvector.
    CurvatureFallback,
    /// CG ran out of iterations; best step so far.
    IterationLimit,
}

/// Approximate minimizer of `m(d) = ⟨g, d⟩ + ½⟨Bd, d⟩` over `‖d‖ ≤ δ`.
#[derive(Clone, Debug)]
pub struct TrStep {
    pub d: Vector,
    /// `m(0) − m(d)`
    pub model_decrease: f64,
    pub status: TrStatus,
    pub cg_iters: usize,
}

/// Positive root `τ` of `‖d + τp‖ = δ`.
fn boundary_root(d: &Vector, p: &Vector, delta: f64) -> f64 {
    let a = p.dot(p);
    let b = 2.0 * d.dot(p);
    let c = d.dot(d) - delta * delta;
    if a == 0.0 {
        return 0.0;
    }
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // Numerically stable form of (−b + disc) / 2a; c ≤ 0 inside the region.
    if b >= 0.0 {
        if b + disc == 0.0 {
            0.0
        } else {
            -2.0 * c / (b + disc)
        }
    } else {
        (-b + disc) / (2.0 * a)
    }
}

fn model_decrease(grad: &Vector, d: &Vector, bd: &Vector) -> f64 {
    -(grad.dot(d) + 0.5 * d.dot(bd))
}

/// Steihaug truncated conjugate gradient for the trust-region subproblem.
///
/// `B d` is tracked through the CG recurrences, so one operator application is
/// spent per iteration.
pub fn steihaug_cg(
    grad: &Vector,
    op: &dyn LinearOperator,
    delta: f64,
    eps: f64,
    max_iter: usize,
) -> TrStep {
    let n = grad.len();
    let mut d = Vector::zeros(n);
    let mut bd = Vector::zeros(n);
    let mut r = grad.clone();
    let mut rr = r.dot(&r);
    if rr.sqrt() <= eps {
        return TrStep {
            d,
            model_decrease: 0.0,
            status: TrStatus::InteriorNewton,
            cg_iters: 0,
        };
    }
    let mut p = -&r;
    for it in 0..max_iter {
        let bp = op.apply(&p);
        let curv = p.dot(&bp);
        if curv <= 0.0 {
            let tau = boundary_root(&d, &p, delta);
            axpy(tau, &p, &mut d);
            axpy(tau, &bp, &mut bd);
            return TrStep {
                model_decrease: model_decrease(grad, &d, &bd),
                d,
                status: TrStatus::BoundaryNegCurv,
                cg_iters: it + 1,
            };
        }
        let alpha = rr / curv;
        let next = &d + &(&p * alpha);
        if norm(&next) >= delta {
            let tau = boundary_root(&d, &p, delta);
            axpy(tau, &p, &mut d);
            axpy(tau, &bp, &mut bd);
            return TrStep {
                model_decrease: model_decrease(grad, &d, &bd),
                d,
                status: TrStatus::BoundaryCg,
                cg_iters: it + 1,
            };
        }
        d = next;
        axpy(alpha, &bp, &mut bd);
        axpy(alpha, &bp, &mut r);
        let rr_next = r.dot(&r);
        if rr_next.sqrt() <= eps {
            let status = if norm(&d) < delta * (1.0 - 1e-8) {
                TrStatus::InteriorNewton
            } else {
                TrStatus::BoundaryCg
            };
            return TrStep {
                model_decrease: model_decrease(grad, &d, &bd),
                d,
                status,
                cg_iters: it + 1,
            };
        }
        let beta = rr_next / rr;
        rr = rr_next;
        p = &(&p * beta) - &r;
    }
    TrStep {
        model_decrease: model_decrease(grad, &d, &bd),
        d,
        status: TrStatus::IterationLimit,
        cg_iters: max_iter,
    }
}

/// Replace `step` by `±δv` when it falls short of `β₂(−λ)δ²` model decrease and
/// the eigenvector step does better. The sign makes `⟨grad, d⟩ ≤ 0`.
pub fn curvature_safeguard(
    step: TrStep,
    grad: &Vector,
    delta: f64,
    eig: &EigEstimate,
    beta2: f64,
) -> TrStep {
    let lambda = eig.lambda_min;
    if !(lambda < 0.0) || step.model_decrease >= beta2 * (-lambda) * delta * delta {
        return step;
    }
    let sign = if grad.dot(&eig.v) > 0.0 { -1.0 } else { 1.0 };
    let dc = &eig.v * (sign * delta);
    // ⟨B v, v⟩ is the Ritz value for a unit Ritz vector.
    let dec = -grad.dot(&dc) - 0.5 * lambda * delta * delta;
    if dec > step.model_decrease {
        TrStep {
            d: dc,
            model_decrease: dec,
            status: TrStatus::CurvatureFallback,
            cg_iters: step.cg_iters,
        }
    } else {
        step
    }
}
