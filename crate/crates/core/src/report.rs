//! Solver outcomes and the serialized per-run record.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::Vector;
use crate::oracles::CallCounters;
use crate::problems::ProblemDescriptor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    SecondOrderStationary,
    FirstOrderStationary,
    BudgetExhausted,
    Error,
}

/// Second-order termination certificate of the final iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub residual_inf: f64,
    pub lambda_min_estimate: f64,
    pub eig_residual: f64,
}

/// One logged iteration. Step fields describe the move leaving this point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub x: Vec<f64>,
    pub fbe: f64,
    pub res_inf: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
}

impl TrajectoryPoint {
    pub fn new(iter: usize, x: &Vector, fbe: f64, res_inf: f64, gamma: f64) -> Self {
        Self {
            iter,
            x: x.to_vec(),
            fbe,
            res_inf,
            gamma,
            tau: None,
            sigma: None,
            residual_sq: None,
            curvature: None,
            rho: None,
            accepted: None,
        }
    }
}

/// What a solver returns; the harness adds identification and timing.
#[derive(Clone, Debug)]
pub struct SolverRun {
    pub status: Status,
    /// Backward point of the final iterate, always feasible for `g`.
    pub final_point: Vector,
    pub final_fbe: f64,
    pub final_phi: f64,
    pub residual_inf: f64,
    pub gamma: f64,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    pub counters: CallCounters,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: String,
    pub problem: ProblemDescriptor,
    pub seed: u64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub x0_hash: String,
    pub final_point_hash: Option<String>,
    pub final_point: Option<Vec<f64>>,
    pub final_fbe: Option<f64>,
    pub final_phi: Option<f64>,
    pub residual_inf: Option<f64>,
    pub lambda_min_estimate: Option<f64>,
    pub eig_residual: Option<f64>,
    pub gamma: Option<f64>,
    pub iterations: usize,
    pub counters: CallCounters,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl RunReport {
    pub fn from_run(
        solver: &str,
        problem: ProblemDescriptor,
        x0: &Vector,
        run: SolverRun,
        wall_time_ms: f64,
    ) -> Self {
        Self {
            solver: solver.to_string(),
            seed: problem.seed,
            problem,
            status: run.status,
            error: None,
            x0_hash: hash_vector(x0),
            final_point_hash: Some(hash_vector(&run.final_point)),
            final_point: Some(run.final_point.to_vec()),
            final_fbe: finite(run.final_fbe),
            final_phi: finite(run.final_phi),
            residual_inf: finite(run.residual_inf),
            lambda_min_estimate: run.certificate.map(|c| c.lambda_min_estimate),
            eig_residual: run.certificate.map(|c| c.eig_residual),
            gamma: Some(run.gamma),
            iterations: run.iterations,
            counters: run.counters,
            wall_time_ms,
            trajectory: run.trajectory,
        }
    }

    pub fn from_error(
        solver: &str,
        problem: ProblemDescriptor,
        x0: &Vector,
        error: &crate::Error,
        wall_time_ms: f64,
    ) -> Self {
        Self {
            solver: solver.to_string(),
            seed: problem.seed,
            problem,
            status: Status::Error,
            error: Some(error.to_string()),
            x0_hash: hash_vector(x0),
            final_point_hash: None,
            final_point: None,
            final_fbe: None,
            final_phi: None,
            residual_inf: None,
            lambda_min_estimate: None,
            eig_residual: None,
            gamma: None,
            iterations: 0,
            counters: CallCounters::default(),
            wall_time_ms,
            trajectory: None,
        }
    }

    /// Copy with wall time zeroed, for byte-level determinism comparisons.
    pub fn canonical(&self) -> Self {
        Self {
            wall_time_ms: 0.0,
            ..self.clone()
        }
    }
}

/// SHA-256 over the little-endian bytes of the entries, hex encoded.
pub fn hash_vector(x: &Vector) -> String {
    let mut h = Sha256::new();
    for v in x {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
