//! Matrix-free inner solvers.

mod lanczos;
mod lbfgs;
mod steihaug;

pub use lanczos::{lanczos_min_eig, EigEstimate};
pub use lbfgs::{lbfgs_direction, LbfgsBuffer, DEFAULT_CAPACITY as LBFGS_CAPACITY};
pub use steihaug::{curvature_safeguard, steihaug_cg, TrStatus, TrStep};

/// CG tolerance `min{½‖∇φ_γ‖∞, ‖∇φ_γ‖∞^{3/2}}`.
pub fn cg_tolerance(grad_inf: f64) -> f64 {
    (0.5 * grad_inf).min(grad_inf.powf(1.5))
}
