//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are evaluated and reported exactly as
//! stated but do not fail the test; each entry carries the reason.

use std::io::Write;
use std::time::{Duration, Instant};

use ndarray::array;
use nsaddle::check::run_checks;
use nsaddle::harness::{
    aggregate, known_optimum, run_solver, run_sweep, Aggregate, Defaults, SolverKind,
};
use nsaddle::linalg::Vector;
use nsaddle::pgcl::DirectionMode;
use nsaddle::problems::{toy_box, ProblemConfig, ToyVariant};
use nsaddle::report::{RunReport, Status};

const TOL_R: f64 = 1e-10;
const TOL_LAMBDA: f64 = 1e-10;

const KNOWN_UNATTAINABLE: &[(&str, &str)] = &[(
    "2-pgm",
    "from (-0.4, 0) every proximal-gradient step maps |x| to max((1 + 2g)|x| - g, 0), \
     which shrinks |x| whenever |x| < 0.5, so PGM converges to the strict saddle (0, 0) \
     for every stepsize g",
)];

struct Line {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn say(text: &str) {
    // Written to the raw handle so the lines survive output capture.
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{text}");
}

fn dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn near_any(r: &RunReport, targets: &[[f64; 2]], tol: f64) -> bool {
    match &r.final_point {
        Some(p) => targets.iter().any(|t| dist(p, t) <= tol),
        None => false,
    }
}

fn certified(r: &RunReport) -> bool {
    r.status == Status::SecondOrderStationary
        && r.residual_inf.is_some_and(|v| v <= TOL_R)
        && r.lambda_min_estimate.is_some_and(|l| l >= -TOL_LAMBDA)
}

fn describe(r: &RunReport) -> String {
    format!(
        "{} -> {:?} ({:?}, lambda {:?})",
        r.solver,
        r.final_point.as_deref().unwrap_or(&[]),
        r.status,
        r.lambda_min_estimate
    )
}

fn toy_run(variant: ToyVariant, kind: SolverKind, x0: Vector) -> (RunReport, Duration) {
    let inst = toy_box(variant).expect("toy instance");
    let t = Instant::now();
    let r = run_solver(kind, &inst, &x0, &Defaults::default());
    (r, t.elapsed())
}

fn criterion_1() -> Vec<Line> {
    let x0 = array![0.1, 0.0];
    let (pgm, t_pgm) = toy_run(ToyVariant::QuadraticBox, SolverKind::Pgm, x0.clone());
    let (ntra, t_ntra) = toy_run(ToyVariant::QuadraticBox, SolverKind::Ntra, x0.clone());
    let (pgcl, t_pgcl) = toy_run(ToyVariant::QuadraticBox, SolverKind::Pgcl, x0);
    let fast = [t_pgm, t_ntra, t_pgcl]
        .iter()
        .all(|t| t.as_secs_f64() < 1.0);
    let passed = near_any(&pgm, &[[1.0, 0.0]], 1e-6)
        && [&ntra, &pgcl]
            .iter()
            .all(|r| near_any(r, &[[1.0, 1.0]], 1e-6) && certified(r))
        && fast;
    vec![Line {
        id: "1",
        passed,
        detail: format!(
            "quadratic box from (0.1, 0): {}; {}; {}; max time {:.3}s",
            describe(&pgm),
            describe(&ntra),
            describe(&pgcl),
            [t_pgm, t_ntra, t_pgcl]
                .iter()
                .map(Duration::as_secs_f64)
                .fold(0.0, f64::max)
        ),
    }]
}

fn criterion_2() -> Vec<Line> {
    let x0 = array![-0.4, 0.0];
    let (pgm, t_pgm) = toy_run(ToyVariant::L1Box, SolverKind::Pgm, x0.clone());
    let (ntra, t_ntra) = toy_run(ToyVariant::L1Box, SolverKind::Ntra, x0.clone());
    let (pgcl, t_pgcl) = toy_run(ToyVariant::L1Box, SolverKind::Pgcl, x0);
    let minimizers = [
        [1.0, 1.0],
        [1.0, -1.0],
        [-1.0, 1.0],
        [-1.0, -1.0],
        [0.0, 1.0],
        [0.0, -1.0],
    ];
    let second = [&ntra, &pgcl]
        .iter()
        .all(|r| near_any(r, &minimizers, 1e-6) && certified(r))
        && t_ntra.as_secs_f64() < 1.0
        && t_pgcl.as_secs_f64() < 1.0;
    vec![
        Line {
            id: "2-pgm",
            passed: near_any(&pgm, &[[-1.0, 0.0]], 1e-6) && t_pgm.as_secs_f64() < 1.0,
            detail: format!("l1 box from (-0.4, 0), target (-1, 0): {}", describe(&pgm)),
        },
        Line {
            id: "2-second-order",
            passed: second,
            detail: format!(
                "l1 box from (-0.4, 0): {}; {}",
                describe(&ntra),
                describe(&pgcl)
            ),
        },
    ]
}

fn sweep(
    config: &ProblemConfig,
    solvers: &[SolverKind],
    seeds: u64,
    defaults: &Defaults,
) -> (Vec<RunReport>, Aggregate, Duration) {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..seeds).collect();
    let reports = run_sweep(config, solvers, &seeds, defaults).expect("sweep");
    let agg = aggregate(&reports, known_optimum(config)).expect("aggregate");
    (reports, agg, t.elapsed())
}

fn global(agg: &Aggregate, solver: &str) -> usize {
    agg.summary(solver)
        .and_then(|s| s.count_global_optimal)
        .unwrap_or(0)
}

fn median(agg: &Aggregate, solver: &str, key: &str) -> u64 {
    agg.summary(solver)
        .and_then(|s| s.median_counts.get(key).copied())
        .unwrap_or(u64::MAX)
}

fn criterion_3() -> Vec<Line> {
    let config = ProblemConfig::PhaseRetrieval { n: 100, m: 3000 };
    let (_, agg, t) = sweep(&config, &SolverKind::ALL, 20, &Defaults::default());
    let counts: Vec<String> = SolverKind::ALL
        .iter()
        .map(|k| format!("{} {}/20", k.name(), global(&agg, k.name())))
        .collect();
    let passed =
        SolverKind::ALL.iter().all(|k| global(&agg, k.name()) >= 18) && t.as_secs_f64() < 300.0;
    vec![Line {
        id: "3",
        passed,
        detail: format!(
            "phase retrieval n=100 m=3000, phi <= 1e-3: {}; {:.1}s",
            counts.join(", "),
            t.as_secs_f64()
        ),
    }]
}

fn criterion_4() -> Vec<Line> {
    let config = ProblemConfig::PhaseRetrieval { n: 100, m: 300 };
    let solvers = [SolverKind::Panoc, SolverKind::Ntra, SolverKind::Pgcl];
    let (reports, agg, t) = sweep(&config, &solvers, 50, &Defaults::default());
    let second: Vec<&RunReport> = reports
        .iter()
        .filter(|r| r.solver == "ntra" || r.solver == "pgcl")
        .collect();
    let n_cert = second.iter().filter(|r| certified(r)).count();
    let (pgcl, panoc, ntra) = (
        global(&agg, "pgcl"),
        global(&agg, "panoc"),
        global(&agg, "ntra"),
    );
    let passed = pgcl >= panoc && n_cert == second.len() && t.as_secs_f64() < 600.0;
    vec![Line {
        id: "4",
        passed,
        detail: format!(
            "phase retrieval n=100 m=300, global optimum counts: pgcl {pgcl}, panoc {panoc}, \
             ntra {ntra}; certified {n_cert}/{}; {:.1}s",
            second.len(),
            t.as_secs_f64()
        ),
    }]
}

fn criterion_5() -> Vec<Line> {
    let config = ProblemConfig::SparsePca {
        n: 200,
        kappa: 1e-2,
        density: 0.1,
    };
    let solvers = [SolverKind::Panoc, SolverKind::Ntra, SolverKind::Pgcl];
    let (reports, agg, t1) = sweep(&config, &solvers, 20, &Defaults::default());
    // The hvp comparison is made with L-BFGS fast directions for PGCL.
    let mut lbfgs = Defaults::default();
    lbfgs.pgcl.direction_mode = DirectionMode::Lbfgs;
    let (reports_lb, agg_lb, t2) = sweep(&config, &[SolverKind::Pgcl], 20, &lbfgs);

    let terminated = |rs: &[RunReport]| {
        rs.iter().all(|r| {
            r.status != Status::Error
                && r.status != Status::BudgetExhausted
                && r.residual_inf.is_some_and(|v| v <= TOL_R)
        })
    };
    let all_done = terminated(&reports) && terminated(&reports_lb);
    let (it_ntra, it_panoc) = (
        median(&agg, "ntra", "iterations"),
        median(&agg, "panoc", "iterations"),
    );
    let (hvp_ntra, hvp_pgcl_lb, hvp_pgcl_cg) = (
        median(&agg, "ntra", "hvp_f"),
        median(&agg_lb, "pgcl", "hvp_f"),
        median(&agg, "pgcl", "hvp_f"),
    );
    let secs = (t1 + t2).as_secs_f64();
    let passed = all_done && it_ntra <= it_panoc && hvp_pgcl_lb >= hvp_ntra && secs < 600.0;
    say(&format!(
        "INFO 5: default newton_cg PGCL median hvp {hvp_pgcl_cg}, median iterations {}",
        median(&agg, "pgcl", "iterations")
    ));
    vec![Line {
        id: "5",
        passed,
        detail: format!(
            "sparse PCA n=200: all terminated {all_done}; median iterations ntra {it_ntra} \
             <= panoc {it_panoc}; median hvp pgcl(lbfgs) {hvp_pgcl_lb} (iterations {}) >= \
             ntra {hvp_ntra}; {secs:.1}s",
            median(&agg_lb, "pgcl", "iterations")
        ),
    }]
}

fn criterion_6() -> Vec<Line> {
    let t = Instant::now();
    let items = run_checks(0);
    let secs = t.elapsed().as_secs_f64();
    let failed: Vec<&str> = items
        .iter()
        .filter(|i| !i.passed)
        .map(|i| i.name.as_str())
        .collect();
    vec![Line {
        id: "6",
        passed: failed.is_empty() && secs < 120.0,
        detail: format!(
            "invariant suite: {} items, failed {:?}; {secs:.2}s",
            items.len(),
            failed
        ),
    }]
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    for criterion in [
        criterion_1 as fn() -> Vec<Line>,
        criterion_2,
        criterion_6,
        criterion_3,
        criterion_4,
        criterion_5,
    ] {
        for line in criterion() {
            let tag = if line.passed { "PASS" } else { "FAIL" };
            say(&format!("{tag} criterion {}: {}", line.id, line.detail));
            lines.push(line);
        }
    }
    let mut unexpected = Vec::new();
    for line in lines.iter().filter(|l| !l.passed) {
        match KNOWN_UNATTAINABLE.iter().find(|(id, _)| *id == line.id) {
            Some((_, why)) => say(&format!("known failure {}: {why}", line.id)),
            None => unexpected.push(line.id),
        }
    }
    assert!(unexpected.is_empty(), "failed criteria: {unexpected:?}");
}

/// The outcome reported by the `2-pgm` line, derived independently: the PG map on
/// the axis is `x ↦ sign(x)·max((1 + 2γ)|x| − γ, 0)`.
#[test]
fn pgm_on_l1_toy_contracts_to_origin() {
    for gamma in [0.05, 0.2, 0.45] {
        let mut x: f64 = -0.4;
        for _ in 0..200 {
            x = x.signum() * ((1.0 + 2.0 * gamma) * x.abs() - gamma).max(0.0);
        }
        assert_eq!(x, 0.0);
    }
    let (r, _) = toy_run(ToyVariant::L1Box, SolverKind::Pgm, array![-0.4, 0.0]);
    assert!(near_any(&r, &[[0.0, 0.0]], 1e-6), "{}", describe(&r));
}
