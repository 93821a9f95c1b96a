//! Second-order proximal-gradient methods that escape nonsmooth strict saddle points
//! of composite objectives `φ = f + g`, built on the forward-backward envelope.
//!
//! The two main solvers are [`ntra::ntra_solve`], a trust-region method on the
//! envelope, and [`pgcl::pgcl_solve`], a proximal-gradient method with a curvilinear
//! linesearch along negative-curvature directions. [`baselines`] holds plain PGM and
//! a PANOC-style method for comparison; [`harness`] runs seeded sweeps.

pub mod baselines;
pub mod check;
mod common;
pub mod error;
pub mod fbe;
pub mod harness;
pub mod linalg;
pub mod ntra;
pub mod oracles;
pub mod pgcl;
pub mod problems;
pub mod prox;
pub mod report;
pub mod subsolvers;

pub use error::{Error, Result};
pub use linalg::Vector;
