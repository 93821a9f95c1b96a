//! Setup shared by all solvers.

use crate::error::Result;
use crate::fbe::{FbeState, INITIAL_GAMMA_FACTOR};
use crate::linalg::Vector;
use crate::oracles::{estimate_lipschitz, Composite, Counters};
use crate::report::{Certificate, SolverRun, Status, TrajectoryPoint};

/// Lipschitz estimate and initial stepsize `0.9/L̂` unless one is given.
pub(crate) fn initial_stepsize(
    problem: &Composite<'_>,
    x0: &Vector,
    gamma0: Option<f64>,
    seed: u64,
) -> Result<(f64, f64)> {
    let lhat = estimate_lipschitz(problem.smooth, x0, seed)?;
    let gamma = gamma0.unwrap_or(INITIAL_GAMMA_FACTOR / lhat);
    Ok((lhat, gamma))
}

/// Distinct, reproducible seed for the `k`-th randomized subsolver call of a run.
pub(crate) fn call_seed(seed: u64, k: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        ^ (k as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn point(k: usize, state: &FbeState) -> TrajectoryPoint {
    TrajectoryPoint::new(k, &state.x, state.fbe, state.residual_inf(), state.gamma)
}

pub(crate) struct Finish<'a> {
    pub status: Status,
    /// Iterate whose envelope data is reported.
    pub state: &'a FbeState,
    /// Reported point; `None` means the backward point of `state`.
    pub final_point: Option<Vector>,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Assemble the run; evaluates `φ` at the reported point through the counted oracles.
pub(crate) fn finish(problem: &Composite<'_>, counters: &Counters, done: Finish<'_>) -> SolverRun {
    let (x, phi) = match done.final_point {
        Some(x) => {
            let phi = problem.phi(&x);
            (x, phi)
        }
        None => {
            let x = done.state.xbar.clone();
            (x.clone(), problem.smooth.eval(&x) + done.state.g_xbar)
        }
    };
    SolverRun {
        status: done.status,
        final_point: x,
        final_fbe: done.state.fbe,
        final_phi: phi,
        residual_inf: done.state.residual_inf(),
        gamma: done.state.gamma,
        certificate: done.certificate,
        iterations: done.iterations,
        counters: counters.snapshot(),
        trajectory: done.trajectory,
    }
}
