//! Closed-form proximal maps and Clarke Jacobian-vector products for the
//! nonsmooth terms used by the shipped problems.
//!
//! At kinks the Clarke Jacobian is a set. The element returned here is always the
//! most clipped one: derivative `0` on the L1 dead-zone boundary and on box faces,
//! and the sphere-projection form on the ball boundary.

use crate::error::{Error, Result};
use crate::linalg::{norm, Vector};
use crate::oracles::NonsmoothOracle;

/// Relative slack used when testing membership of the ball.
const BALL_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum ProxSpec {
    /// `κ‖x‖₁`
    L1 { kappa: f64 },
    /// Indicator of `[lo, hi]`.
    Box { lo: Vector, hi: Vector },
    /// Indicator of the closed Euclidean ball of `radius` around the origin.
    Ball { radius: f64 },
    /// `κ‖x‖₁ + δ_{‖x‖ ≤ radius}`
    L1Ball { kappa: f64, radius: f64 },
    /// `Σ κᵢ|xᵢ| + δ_[lo, hi]` with per-coordinate weights.
    L1Box {
        kappa: Vector,
        lo: Vector,
        hi: Vector,
    },
}

impl ProxSpec {
    pub fn l1(kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(Self::L1 { kappa })
    }

    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        check_box(&lo, &hi)?;
        Ok(Self::Box { lo, hi })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self::Ball { radius })
    }

    pub fn l1_ball(kappa: f64, radius: f64) -> Result<Self> {
        check_kappa(kappa)?;
        check_radius(radius)?;
        Ok(Self::L1Ball { kappa, radius })
    }

    pub fn l1_box(kappa: Vector, lo: Vector, hi: Vector) -> Result<Self> {
        check_box(&lo, &hi)?;
        if kappa.len() != lo.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: kappa.len(),
            });
        }
        if kappa.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::InvalidConfig("kappa must be nonnegative".into()));
        }
        Ok(Self::L1Box { kappa, lo, hi })
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Self::L1 { kappa } => kappa * l1_norm(x),
            Self::Box { lo, hi } => box_indicator(x, lo, hi),
            Self::Ball { radius } => ball_indicator(x, *radius),
            Self::L1Ball { kappa, radius } => ball_indicator(x, *radius) + kappa * l1_norm(x),
            Self::L1Box { kappa, lo, hi } => {
                let ind = box_indicator(x, lo, hi);
                ind + x.iter().zip(kappa).map(|(xi, k)| k * xi.abs()).sum::<f64>()
            }
        }
    }

    pub fn prox(&self, y: &Vector, gamma: f64) -> Vector {
        match self {
            Self::L1 { kappa } => soft_threshold(y, gamma * kappa),
            Self::Box { lo, hi } => clamp(y, lo, hi),
            Self::Ball { radius } => proj_ball(y, *radius),
            Self::L1Ball { kappa, radius } => prox_l1_ball(y, gamma * kappa, *radius),
            Self::L1Box { kappa, lo, hi } => {
                let s = weighted_soft_threshold(y, kappa, gamma);
                clamp(&s, lo, hi)
            }
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig("kappa must be nonnegative".into()))
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig("radius must be positive".into()))
    }
}

fn check_box(lo: &Vector, hi: &Vector) -> Result<()> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch {
            expected: lo.len(),
            got: hi.len(),
        });
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
        return Err(Error::EmptyBox);
    }
    Ok(())
}

fn l1_norm(x: &Vector) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn box_indicator(x: &Vector, lo: &Vector, hi: &Vector) -> f64 {
    let inside = x
        .iter()
        .zip(lo.iter().zip(hi))
        .all(|(xi, (l, h))| *l <= *xi && *xi <= *h);
    if inside {
        0.0
    } else {
        f64::INFINITY
    }
}

fn ball_indicator(x: &Vector, radius: f64) -> f64 {
    if norm(x) <= radius * (1.0 + BALL_SLACK) {
        0.0
    } else {
        f64::INFINITY
    }
}

fn clamp(x: &Vector, lo: &Vector, hi: &Vector) -> Vector {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(xi, (l, h))| xi.max(*l).min(*h))
        .collect()
}

fn shrink(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

/// Componentwise `sign(xᵢ)·max(|xᵢ| − τ, 0)`: the prox of `τ‖·‖₁`.
pub fn soft_threshold(x: &Vector, tau: f64) -> Vector {
    x.mapv(|v| shrink(v, tau))
}

fn weighted_soft_threshold(x: &Vector, kappa: &Vector, gamma: f64) -> Vector {
    x.iter()
        .zip(kappa)
        .map(|(v, k)| shrink(*v, gamma * k))
        .collect()
}

/// Euclidean projection onto `[lo, hi]`.
pub fn proj_box(x: &Vector, lo: &Vector, hi: &Vector) -> Result<Vector> {
    check_box(lo, hi)?;
    Ok(clamp(x, lo, hi))
}

/// Euclidean projection onto the closed ball of radius `r` around the origin.
pub fn proj_ball(x: &Vector, r: f64) -> Vector {
    let nx = norm(x);
    // Same slack as the membership test, so projected points stay fixed.
    if nx <= r * (1.0 + BALL_SLACK) {
        x.clone()
    } else {
        x * (r / nx)
    }
}

/// Prox of `τ‖·‖₁ + δ_{‖·‖ ≤ r}`: soft-threshold, then radial projection.
pub fn prox_l1_ball(x: &Vector, tau: f64, r: f64) -> Vector {
    proj_ball(&soft_threshold(x, tau), r)
}

/// Dead-zone mask of the soft-threshold: `1` where `|yᵢ| > τᵢ`, `1` everywhere if `τᵢ = 0`.
fn l1_mask(y: f64, tau: f64) -> f64 {
    if tau == 0.0 || y.abs() > tau {
        1.0
    } else {
        0.0
    }
}

fn box_mask(s: f64, lo: f64, hi: f64) -> f64 {
    if lo < s && s < hi {
        1.0
    } else {
        0.0
    }
}

/// Jacobian of the ball projection at `s`, applied to `u`.
fn ball_jvp(s: &Vector, r: f64, u: &Vector) -> Vector {
    let ns = norm(s);
    if ns < r {
        return u.clone();
    }
    let coef = s.dot(u) / (ns * ns);
    (u - &(s * coef)) * (r / ns)
}

/// `P v` for the tie-broken Clarke Jacobian element `P` of `prox_{γg}` at `y`.
pub fn prox_jvp(spec: &ProxSpec, y: &Vector, gamma: f64, v: &Vector) -> Vector {
    match spec {
        ProxSpec::L1 { kappa } => {
            let tau = gamma * kappa;
            Vector::from_iter(y.iter().zip(v).map(|(yi, vi)| l1_mask(*yi, tau) * vi))
        }
        ProxSpec::Box { lo, hi } => Vector::from_iter(
            y.iter()
                .zip(v)
                .zip(lo.iter().zip(hi))
                .map(|((yi, vi), (l, h))| box_mask(*yi, *l, *h) * vi),
        ),
        ProxSpec::Ball { radius } => ball_jvp(y, *radius, v),
        ProxSpec::L1Ball { kappa, radius } => {
            let tau = gamma * kappa;
            let s = soft_threshold(y, tau);
            let u = Vector::from_iter(y.iter().zip(v).map(|(yi, vi)| l1_mask(*yi, tau) * vi));
            ball_jvp(&s, *radius, &u)
        }
        ProxSpec::L1Box { kappa, lo, hi } => {
            Vector::from_iter(y.iter().zip(v).zip(kappa).zip(lo.iter().zip(hi)).map(
                |(((yi, vi), k), (l, h))| {
                    let tau = gamma * k;
                    let s = shrink(*yi, tau);
                    l1_mask(*yi, tau) * box_mask(s, *l, *h) * vi
                },
            ))
        }
    }
}

impl NonsmoothOracle for ProxSpec {
    fn eval(&self, x: &Vector) -> f64 {
        self.value(x)
    }

    fn prox(&self, y: &Vector, gamma: f64) -> Vector {
        ProxSpec::prox(self, y, gamma)
    }

    fn prox_jvp(&self, y: &Vector, gamma: f64, v: &Vector) -> Vector {
        prox_jvp(self, y, gamma, v)
    }
}

/// Distance from `y` to the nearest kink of `prox_{γg}`, used to keep
/// finite-difference checks away from points where the prox is not differentiable.
pub fn kink_distance(spec: &ProxSpec, y: &Vector, gamma: f64) -> f64 {
    let l1_gap = |y: &Vector, tau: f64| {
        if tau == 0.0 {
            f64::INFINITY
        } else {
            y.iter()
                .map(|v| (v.abs() - tau).abs())
                .fold(f64::INFINITY, f64::min)
        }
    };
    let box_gap = |s: &Vector, lo: &Vector, hi: &Vector| {
        s.iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (l, h))| (v - l).abs().min((h - v).abs()))
            .fold(f64::INFINITY, f64::min)
    };
    match spec {
        ProxSpec::L1 { kappa } => l1_gap(y, gamma * kappa),
        ProxSpec::Box { lo, hi } => box_gap(y, lo, hi),
        ProxSpec::Ball { radius } => (norm(y) - radius).abs(),
        ProxSpec::L1Ball { kappa, radius } => {
            let tau = gamma * kappa;
            let s = soft_threshold(y, tau);
            l1_gap(y, tau).min((norm(&s) - radius).abs())
        }
        ProxSpec::L1Box { kappa, lo, hi } => {
            let mut gap = f64::INFINITY;
            for (i, yi) in y.iter().enumerate() {
                let tau = gamma * kappa[i];
                if tau > 0.0 {
                    gap = gap.min((yi.abs() - tau).abs());
                }
                let s = shrink(*yi, tau);
                gap = gap.min((s - lo[i]).abs()).min((hi[i] - s).abs());
            }
            gap
        }
    }
}
