//! Invariant suite run by the `check` subcommand.
//!
//! Each item re-derives a property of the envelope, the prox operators, the inner
//! solvers or the solver logs from an independent oracle (finite differences,
//! dense linear algebra, brute-force search) on small seeded instances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::fbe::{fbe_eval, fbe_grad, genhess_vp, rounding_slack, FbeState, GenHessOp};
use crate::linalg::{densify, norm, power_norm, LinearOperator, Vector};
use crate::ntra::{ntra_solve, NtraConfig};
use crate::oracles::{Composite, SmoothOracle};
use crate::pgcl::{pgcl_solve, PgclConfig};
use crate::problems::{phase_retrieval, sparse_pca, toy_box, ProblemInstance, ToyVariant};
use crate::prox::{kink_distance, prox_jvp, ProxSpec};
use crate::report::TrajectoryPoint;
use crate::subsolvers::{
    curvature_safeguard, lanczos_min_eig, lbfgs_direction, steihaug_cg, LbfgsBuffer,
};

const KINK_MARGIN: f64 = 1e-3;
const SANDWICH_POINTS: usize = 200;
const GRAD_POINTS: usize = 50;
const OPERATOR_POINTS: usize = 20;
const PROX_SAMPLES: usize = 100;
const PROX_CANDIDATES: usize = 1000;

/// Outcome of one invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckItem {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// Small instances of every shipped problem family.
pub fn check_problems() -> Result<Vec<ProblemInstance>> {
    Ok(vec![
        toy_box(ToyVariant::QuadraticBox)?,
        toy_box(ToyVariant::L1Box)?,
        sparse_pca(30, 1e-2, 0.1, 7)?,
        phase_retrieval(12, 60, 7)?,
    ])
}

/// Run the full suite. Deterministic for a fixed `seed`.
pub fn run_checks(seed: u64) -> Vec<CheckItem> {
    let mut items = Vec::new();
    match check_problems() {
        Ok(problems) => {
            for (k, p) in problems.iter().enumerate() {
                let s = seed.wrapping_add(1000 * k as u64);
                items.extend(problem_checks(p, s));
            }
        }
        Err(e) => items.push(CheckItem::new("problems", false, format!("error: {e}"))),
    }
    match sparse_pca(30, 1e-2, 0.1, 7) {
        Ok(p) => items.push(CheckItem::from_result(
            "genhess_exact_fd/sparse_pca",
            quadratic_hessian_check(&p, seed ^ 0xa1),
        )),
        Err(e) => items.push(CheckItem::new("genhess_exact_fd", false, e.to_string())),
    }
    items.extend(prox_checks(seed ^ 0xb2));
    items.extend(subsolver_checks(seed ^ 0xc3));
    items.extend(solver_log_checks());
    items
}

fn problem_checks(p: &ProblemInstance, seed: u64) -> Vec<CheckItem> {
    let name = &p.name;
    vec![
        CheckItem::from_result(&format!("hvp_symmetry/{name}"), hvp_symmetry_check(p, seed)),
        CheckItem::from_result(
            &format!("envelope_sandwich/{name}"),
            sandwich_check(p, seed + 1),
        ),
        CheckItem::from_result(
            &format!("envelope_gradient_fd/{name}"),
            gradient_fd_check(p, seed + 2),
        ),
        CheckItem::from_result(
            &format!("genhess_norm_bound/{name}"),
            operator_norm_check(p, seed + 3),
        ),
        CheckItem::from_result(
            &format!("genhess_symmetry/{name}"),
            genhess_symmetry_check(p, seed + 4),
        ),
    ]
}

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    let v = gaussian(n, rng);
    let nv = norm(&v);
    v / nv
}

/// A random point of the domain of `g`, occasionally pushed outside by up to 30%.
fn sample_point(spec: &ProxSpec, n: usize, rng: &mut ChaCha8Rng) -> Vector {
    let x = match spec {
        ProxSpec::Box { lo, hi } | ProxSpec::L1Box { lo, hi, .. } => {
            Vector::from_iter(lo.iter().zip(hi).map(|(l, h)| rng.gen_range(*l..=*h)))
        }
        ProxSpec::Ball { radius } | ProxSpec::L1Ball { radius, .. } => {
            let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
            unit(n, rng) * r
        }
        ProxSpec::L1 { .. } => gaussian(n, rng),
    };
    if rng.gen::<f64>() < 0.25 {
        x * rng.gen_range(1.0..1.3)
    } else {
        x
    }
}

/// `∇²f(x)` as a linear operator.
struct HessAt<'a> {
    smooth: &'a dyn SmoothOracle,
    x: &'a Vector,
}

impl LinearOperator for HessAt<'_> {
    fn dim(&self) -> usize {
        self.smooth.dim()
    }

    fn apply(&self, v: &Vector) -> Vector {
        self.smooth.hvp(self.x, v)
    }
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn to_array(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Spectral norm of `∇²f(x)` from a dense eigendecomposition.
fn hessian_norm(smooth: &dyn SmoothOracle, x: &Vector) -> f64 {
    let h = to_dmatrix(&densify(&HessAt { smooth, x }));
    let sym = (&h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// A random stepsize below `1/L` where `L` bounds `‖∇²f‖` at `x` and at `x̄`.
///
/// The upper curvature of `f` along the segment `[x, x̄]` is convex in the segment
/// parameter for every shipped `f` (constant or a nonnegative combination of
/// squares), so the endpoint bound covers the whole segment.
fn sampled_state(p: &ProblemInstance, x: &Vector, rng: &mut ChaCha8Rng) -> Result<(FbeState, f64)> {
    let comp = p.composite();
    let lx = hessian_norm(p.smooth.as_ref(), x).max(1e-12);
    let mut gamma = rng.gen_range(0.05..0.9) / lx;
    let mut state = fbe_eval(x, gamma, &comp)?;
    for _ in 0..60 {
        let l = lx.max(hessian_norm(p.smooth.as_ref(), &state.xbar));
        if gamma * l < 1.0 {
            return Ok((state, l));
        }
        gamma /= 2.0;
        state = fbe_eval(x, gamma, &comp)?;
    }
    Err(crate::Error::StepsizeUnderflow)
}

fn hvp_symmetry_check(p: &ProblemInstance, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = sample_point(&p.nonsmooth, n, &mut rng);
        let u = gaussian(n, &mut rng);
        let v = gaussian(n, &mut rng);
        let hu = p.smooth.hvp(&x, &u);
        let hv = p.smooth.hvp(&x, &v);
        let scale = (norm(&hu) * norm(&v)).max(norm(&hv) * norm(&u)).max(1e-300);
        worst = worst.max((hu.dot(&v) - u.dot(&hv)).abs() / scale);
    }
    Ok((
        worst <= 1e-10,
        format!("max relative asymmetry {worst:.2e}"),
    ))
}

fn sandwich_check(p: &ProblemInstance, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = p.composite();
    let n = p.dim();
    let (mut lower_viol, mut upper_viol): (f64, f64) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut in_domain = 0;
    for _ in 0..SANDWICH_POINTS {
        let x = sample_point(&p.nonsmooth, n, &mut rng);
        let (s, l) = sampled_state(p, &x, &mut rng)?;
        let phi_x = comp.phi(&x);
        if phi_x.is_finite() {
            in_domain += 1;
            lower_viol = lower_viol.max((s.fbe - phi_x) / (1.0 + phi_x.abs()));
        }
        let d = &x - &s.xbar;
        let bound = s.fbe - (1.0 - s.gamma * l) / (2.0 * s.gamma) * d.dot(&d);
        let phi_bar = comp.phi(&s.xbar);
        upper_viol = upper_viol.max((phi_bar - bound) / (1.0 + s.fbe.abs()));
    }
    let passed = lower_viol <= 1e-9 && upper_viol <= 1e-9;
    Ok((
        passed,
        format!(
            "{SANDWICH_POINTS} points ({in_domain} in dom g): max (fbe - phi) {lower_viol:.2e}, \
             max (phi(xbar) - bound) {upper_viol:.2e}"
        ),
    ))
}

/// Sample a state whose forward point sits at least [`KINK_MARGIN`] from every kink.
fn kink_free_state(p: &ProblemInstance, rng: &mut ChaCha8Rng) -> Result<Option<(FbeState, f64)>> {
    for _ in 0..1000 {
        let x = sample_point(&p.nonsmooth, p.dim(), rng);
        let (s, l) = sampled_state(p, &x, rng)?;
        if kink_distance(&p.nonsmooth, &s.y, s.gamma) >= KINK_MARGIN {
            return Ok(Some((s, l)));
        }
    }
    Ok(None)
}

fn gradient_fd_check(p: &ProblemInstance, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = p.composite();
    let n = p.dim();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..GRAD_POINTS {
        let Some((s, _)) = kink_free_state(p, &mut rng)? else {
            return Ok((false, format!("no kink-free point found after {k} points")));
        };
        let g = fbe_grad(&s, &comp);
        let mut fd = Vector::zeros(n);
        for i in 0..n {
            let mut xp = s.x.clone();
            let mut xm = s.x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = fbe_eval(&xp, s.gamma, &comp)?.fbe;
            let fm = fbe_eval(&xm, s.gamma, &comp)?.fbe;
            fd[i] = (fp - fm) / (2.0 * h);
        }
        worst = worst.max(norm(&(&fd - &g)) / norm(&g).max(1.0));
    }
    Ok((
        worst <= 1e-5,
        format!("{GRAD_POINTS} points: max relative error {worst:.2e}"),
    ))
}

fn operator_norm_check(p: &ProblemInstance, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = p.composite();
    let n = p.dim();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..OPERATOR_POINTS {
        let x = sample_point(&p.nonsmooth, n, &mut rng);
        let (s, _) = sampled_state(p, &x, &mut rng)?;
        let op = GenHessOp::new(&s, comp);
        let est = power_norm(&op, &gaussian(n, &mut rng), 200);
        worst = worst.max(est - 6.0 / s.gamma);
    }
    Ok((
        worst <= 1e-6,
        format!("{OPERATOR_POINTS} points: max (|B| - 6/gamma) {worst:.3e}"),
    ))
}

fn genhess_symmetry_check(p: &ProblemInstance, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = p.composite();
    let n = p.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..OPERATOR_POINTS {
        let Some((s, _)) = kink_free_state(p, &mut rng)? else {
            return Ok((false, "no kink-free point found".into()));
        };
        let u = gaussian(n, &mut rng);
        let v = gaussian(n, &mut rng);
        let bu = genhess_vp(&s, &comp, &u);
        let bv = genhess_vp(&s, &comp, &v);
        let scale = (norm(&bu) * norm(&v)).max(norm(&bv) * norm(&u)).max(1.0);
        worst = worst.max((bv.dot(&u) - v.dot(&bu)).abs() / scale);
    }
    Ok((
        worst <= 1e-8,
        format!("{OPERATOR_POINTS} points: max scaled asymmetry {worst:.2e}"),
    ))
}

/// With quadratic `f` the generalized Hessian is the exact derivative of `∇φ_γ`
/// away from kinks.
fn quadratic_hessian_check(p: &ProblemInstance, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = p.composite();
    let n = p.dim();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..OPERATOR_POINTS {
        let Some((s, _)) = kink_free_state(p, &mut rng)? else {
            return Ok((false, "no kink-free point found".into()));
        };
        let v = unit(n, &mut rng);
        let sp = fbe_eval(&(&s.x + &(&v * h)), s.gamma, &comp)?;
        let sm = fbe_eval(&(&s.x - &(&v * h)), s.gamma, &comp)?;
        let fd = (fbe_grad(&sp, &comp) - fbe_grad(&sm, &comp)) / (2.0 * h);
        let bv = genhess_vp(&s, &comp, &v);
        worst = worst.max(norm(&(&fd - &bv)) / norm(&bv).max(1.0));
    }
    Ok((
        worst <= 1e-4,
        format!("{OPERATOR_POINTS} points: max relative error {worst:.2e}"),
    ))
}

/// Every nonsmooth term shipped by the crate, in three dimensions or fewer.
pub fn check_prox_specs() -> Result<Vec<(&'static str, ProxSpec)>> {
    Ok(vec![
        ("l1", ProxSpec::l1(0.7)?),
        (
            "box",
            ProxSpec::boxed(array![-1.0, -0.5, 0.0], array![1.0, 0.5, 2.0])?,
        ),
        ("ball", ProxSpec::ball(1.3)?),
        ("l1_ball", ProxSpec::l1_ball(0.4, 1.0)?),
        (
            "l1_box",
            ProxSpec::l1_box(
                array![0.3, 0.0, 1.0],
                array![-1.0, -1.0, -1.0],
                array![1.0, 2.0, 1.0],
            )?,
        ),
    ])
}

fn prox_objective(spec: &ProxSpec, z: &Vector, y: &Vector, gamma: f64) -> f64 {
    let d = z - y;
    spec.value(z) + d.dot(&d) / (2.0 * gamma)
}

fn prox_checks(seed: u64) -> Vec<CheckItem> {
    let specs = match check_prox_specs() {
        Ok(s) => s,
        Err(e) => return vec![CheckItem::new("prox", false, e.to_string())],
    };
    let mut items = Vec::new();
    for (k, (name, spec)) in specs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let n = 3;
        // Brute-force optimality.
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..PROX_SAMPLES {
            let y = gaussian(n, &mut rng) * 2.0;
            let gamma = rng.gen_range(0.01..2.0);
            let p = spec.prox(&y, gamma);
            let best = prox_objective(spec, &p, &y, gamma);
            for c in 0..PROX_CANDIDATES {
                let z = if c % 2 == 0 {
                    let eps = 10f64.powf(rng.gen_range(-6.0..0.0));
                    &p + &(gaussian(n, &mut rng) * eps)
                } else {
                    Vector::from_iter((0..n).map(|_| rng.gen_range(-3.0..3.0)))
                };
                let val = prox_objective(spec, &z, &y, gamma);
                worst = worst.max((best - val) / best.abs().max(1.0));
            }
        }
        items.push(CheckItem::new(
            format!("prox_optimality/{name}"),
            worst <= 1e-10,
            format!("max (prox value - candidate value) {worst:.2e}"),
        ));

        // Nonexpansiveness of the map and of the Jacobian element.
        let (mut map_ratio, mut jac_ratio): (f64, f64) = (0.0, 0.0);
        for _ in 0..PROX_SAMPLES {
            let y = gaussian(n, &mut rng) * 2.0;
            let y2 = gaussian(n, &mut rng) * 2.0;
            let gamma = rng.gen_range(0.01..2.0);
            let dp = spec.prox(&y, gamma) - spec.prox(&y2, gamma);
            map_ratio = map_ratio.max(norm(&dp) / norm(&(&y - &y2)));
            let v = gaussian(n, &mut rng);
            jac_ratio = jac_ratio.max(norm(&prox_jvp(spec, &y, gamma, &v)) / norm(&v));
        }
        items.push(CheckItem::new(
            format!("prox_nonexpansive/{name}"),
            map_ratio <= 1.0 + 1e-12 && jac_ratio <= 1.0 + 1e-12,
            format!("max ratios: map {map_ratio:.6}, jacobian {jac_ratio:.6}"),
        ));

        // Jacobian against central differences away from kinks.
        let h = 1e-6;
        let mut worst_fd: f64 = 0.0;
        let mut tested = 0;
        while tested < PROX_SAMPLES {
            let y = gaussian(n, &mut rng) * 2.0;
            let gamma = rng.gen_range(0.01..2.0);
            if kink_distance(spec, &y, gamma) < KINK_MARGIN {
                continue;
            }
            tested += 1;
            let v = unit(n, &mut rng);
            let fd = (spec.prox(&(&y + &(&v * h)), gamma) - spec.prox(&(&y - &(&v * h)), gamma))
                / (2.0 * h);
            let jv = prox_jvp(spec, &y, gamma, &v);
            worst_fd = worst_fd.max(norm(&(&fd - &jv)) / norm(&jv).max(1e-8));
        }
        items.push(CheckItem::new(
            format!("prox_jacobian_fd/{name}"),
            worst_fd <= 1e-4,
            format!("{tested} points: max relative error {worst_fd:.2e}"),
        ));

        if matches!(spec, ProxSpec::Box { .. } | ProxSpec::Ball { .. }) {
            let mut exact = true;
            for _ in 0..PROX_SAMPLES {
                let y = gaussian(n, &mut rng) * 2.0;
                let p = spec.prox(&y, 1.0);
                exact &= spec.prox(&p, 1.0) == p;
            }
            items.push(CheckItem::new(
                format!("projection_idempotent/{name}"),
                exact,
                format!("{PROX_SAMPLES} points"),
            ));
        }
    }
    items
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n)
}

fn eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let norm = e.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    (lo, norm)
}

fn subsolver_checks(seed: u64) -> Vec<CheckItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();

    // Steihaug on positive-definite operators with a huge region is a linear solve.
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(2..=16);
        let b = random_spd(n, &mut rng);
        let g = gaussian(n, &mut rng);
        let step = steihaug_cg(&g, &to_array(&b), 1e6, 1e-13, 10 * n);
        let gd = DVector::from_iterator(n, g.iter().copied());
        let Some(sol) = b.clone().cholesky().map(|c| c.solve(&gd)) else {
            worst = f64::INFINITY;
            continue;
        };
        let newton = Vector::from_iter(sol.iter().map(|v| -v));
        worst = worst.max(norm(&(&step.d - &newton)) / norm(&newton));
    }
    items.push(CheckItem::new(
        "steihaug_dense_solve",
        worst <= 1e-6,
        format!("20 instances: max relative error {worst:.2e}"),
    ));

    // Steihaug and the curvature safeguard on indefinite operators.
    let (mut ok, mut worst_radius, mut worst_cauchy, mut worst_curv) =
        (true, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..20 {
        let n = rng.gen_range(2..=16);
        let b = random_symmetric(n, &mut rng);
        let (lmin, bnorm) = eig_range(&b);
        let op = to_array(&b);
        let g = gaussian(n, &mut rng);
        let delta = rng.gen_range(0.1..3.0);
        let step = steihaug_cg(&g, &op, delta, 1e-10, 10 * n);
        let bd = op.dot(&step.d);
        let dec = -(g.dot(&step.d) + 0.5 * step.d.dot(&bd));
        ok &= (dec - step.model_decrease).abs() <= 1e-10 * (1.0 + dec.abs());
        ok &= dec >= 0.0;
        worst_radius = worst_radius.max(norm(&step.d) / delta - 1.0);
        let gn = norm(&g);
        let cauchy = 0.5 * gn * delta.min(gn / bnorm);
        worst_cauchy = worst_cauchy.max((cauchy - dec) / cauchy);
        let eig = lanczos_min_eig(&op, 50, 1e-12, k);
        let safe = curvature_safeguard(step, &g, delta, &eig, 0.25);
        if lmin < 0.0 {
            let need = 0.25 * (-eig.lambda_min) * delta * delta;
            worst_curv = worst_curv.max((need - safe.model_decrease) / need);
        }
    }
    items.push(CheckItem::new(
        "steihaug_model_conditions",
        ok && worst_radius <= 1e-12 && worst_cauchy <= 1e-12 && worst_curv <= 1e-12,
        format!(
            "20 instances: radius excess {worst_radius:.2e}, cauchy shortfall {worst_cauchy:.2e}, \
             curvature shortfall {worst_curv:.2e}"
        ),
    ));

    // Lanczos against the dense eigensolver.
    let (mut worst_gap, mut worst_unit, mut worst_upper) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for k in 0..20 {
        let n = rng.gen_range(1..=16);
        let b = random_symmetric(n, &mut rng);
        let (lmin, bnorm) = eig_range(&b);
        let est = lanczos_min_eig(&to_array(&b), 50, 1e-12, 100 + k);
        worst_gap = worst_gap.max((est.lambda_min - lmin).abs() / bnorm.max(1e-300));
        worst_unit = worst_unit.max((norm(&est.v) - 1.0).abs());
        worst_upper = worst_upper.max(lmin - 1e-8 - est.lambda_min);
    }
    items.push(CheckItem::new(
        "lanczos_dense_eig",
        worst_gap <= 1e-8 && worst_unit <= 1e-10 && worst_upper <= 0.0,
        format!("20 instances: max |gap|/|B| {worst_gap:.2e}, unit-norm error {worst_unit:.2e}"),
    ));

    // L-BFGS: secant equation, Newton limit on a quadratic, descent.
    let n = 5;
    let h = random_spd(n, &mut rng);
    let ha = to_array(&h);
    let s = gaussian(n, &mut rng);
    let y = ha.dot(&s);
    let mut buf = LbfgsBuffer::default();
    buf.push(s.clone(), y.clone());
    let secant = norm(&(lbfgs_direction(&buf, &y) + &s)) / norm(&s);

    // Pairs from exact linesearch steps; once the iteration has converged the
    // remaining pairs would be rounding noise, so stop there.
    let mut x = gaussian(n, &mut rng);
    let g0 = norm(&ha.dot(&x));
    let mut buf = LbfgsBuffer::default();
    for _ in 0..10 {
        let g = ha.dot(&x);
        if norm(&g) <= 1e-8 * g0 {
            break;
        }
        let d = lbfgs_direction(&buf, &g);
        let t = -g.dot(&d) / d.dot(&ha.dot(&d));
        let xn = &x + &(&d * t);
        buf.push(&xn - &x, ha.dot(&xn) - &g);
        x = xn;
    }
    let g = gaussian(n, &mut rng);
    let d = lbfgs_direction(&buf, &g);
    let gd = DVector::from_iterator(n, g.iter().copied());
    let newton: Vector = match h.clone().cholesky() {
        Some(c) => c.solve(&gd).iter().map(|v| -v).collect(),
        None => Vector::from_elem(n, f64::NAN),
    };
    let newton_err = norm(&(&d - &newton)) / norm(&newton);

    let mut descent = true;
    for _ in 0..50 {
        let mut buf = LbfgsBuffer::default();
        for _ in 0..8 {
            buf.push(gaussian(6, &mut rng), gaussian(6, &mut rng));
        }
        let g = gaussian(6, &mut rng);
        descent &= lbfgs_direction(&buf, &g).dot(&g) < 0.0;
    }
    items.push(CheckItem::new(
        "lbfgs_dense_quadratic",
        secant <= 1e-12 && newton_err <= 0.1 && descent,
        format!(
            "secant error {secant:.2e}, newton relative error {newton_err:.2e}, descent {descent}"
        ),
    ));
    items
}

/// Decrease along consecutive logged points that share a stepsize.
fn ntra_monotone(traj: &[TrajectoryPoint]) -> (bool, usize) {
    let mut pairs = 0;
    let mut ok = true;
    for w in traj.windows(2) {
        if w[0].gamma != w[1].gamma {
            continue;
        }
        pairs += 1;
        ok &= w[1].fbe <= w[0].fbe + rounding_slack(w[0].fbe);
    }
    (ok, pairs)
}

fn pgcl_decrease(traj: &[TrajectoryPoint], mu: f64) -> (bool, usize) {
    let mut pairs = 0;
    let mut ok = true;
    for w in traj.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (Some(tau), Some(sigma), Some(rsq), Some(curv)) =
            (a.tau, a.sigma, a.residual_sq, a.curvature)
        else {
            continue;
        };
        if a.gamma != b.gamma {
            continue;
        }
        pairs += 1;
        let bound = a.fbe - sigma * rsq + 0.5 * mu * tau * tau * curv;
        ok &= b.fbe <= bound + rounding_slack(a.fbe);
    }
    (ok, pairs)
}

fn solver_log_checks() -> Vec<CheckItem> {
    let runs = [
        (ToyVariant::QuadraticBox, array![0.1, 0.0], "quadratic_box"),
        (ToyVariant::L1Box, array![-0.4, 0.0], "l1_box"),
    ];
    let mut items = Vec::new();
    for (variant, x0, name) in runs {
        let inst = match toy_box(variant) {
            Ok(i) => i,
            Err(e) => {
                items.push(CheckItem::new(
                    format!("solver_logs/{name}"),
                    false,
                    e.to_string(),
                ));
                continue;
            }
        };
        let comp: Composite<'_> = inst.composite();
        let ncfg = NtraConfig {
            record_trajectory: true,
            ..NtraConfig::default()
        };
        items.push(CheckItem::from_result(
            &format!("ntra_monotone_log/{name}"),
            ntra_solve(comp, &x0, &ncfg, 0).map(|run| {
                let (ok, pairs) = ntra_monotone(run.trajectory.as_deref().unwrap_or(&[]));
                (ok && pairs > 0, format!("{pairs} logged steps"))
            }),
        ));
        let pcfg = PgclConfig {
            record_trajectory: true,
            ..PgclConfig::default()
        };
        items.push(CheckItem::from_result(
            &format!("pgcl_linesearch_log/{name}"),
            pgcl_solve(comp, &x0, &pcfg, 0).map(|run| {
                let traj = run.trajectory.as_deref().unwrap_or(&[]);
                let (ok, pairs) = pgcl_decrease(traj, pcfg.mu);
                (ok && pairs > 0, format!("{pairs} logged steps"))
            }),
        ));
    }
    items
}
