//! Seeded experiment sweeps, aggregation and file output.
//!
//! Sweeps run in parallel on the rayon pool; set `RAYON_NUM_THREADS` to bound it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{panoc_solve, pgm_solve, BaselineConfig};
use crate::error::{Error, Result};
use crate::linalg::{norm, Vector};
use crate::ntra::{ntra_solve, NtraConfig};
use crate::pgcl::{pgcl_solve, PgclConfig};
use crate::problems::{ProblemConfig, ProblemDescriptor, ProblemInstance, ToyVariant};
use crate::report::{RunReport, Status, TrajectoryPoint};

/// Tolerance for the best-objective and global-optimum counts.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pgm,
    Panoc,
    Ntra,
    Pgcl,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [Self::Pgm, Self::Panoc, Self::Ntra, Self::Pgcl];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pgm => "pgm",
            Self::Panoc => "panoc",
            Self::Ntra => "ntra",
            Self::Pgcl => "pgcl",
        }
    }

    pub fn is_second_order(self) -> bool {
        matches!(self, Self::Ntra | Self::Pgcl)
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown solver {s}")))
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver settings used by sweeps.
#[derive(Clone, Debug, Default)]
pub struct Defaults {
    pub ntra: NtraConfig,
    pub pgcl: PgclConfig,
    pub baseline: BaselineConfig,
}

impl Defaults {
    pub fn with_trajectories(mut self) -> Self {
        self.ntra.record_trajectory = true;
        self.pgcl.record_trajectory = true;
        self.baseline.record_trajectory = true;
        self
    }

    pub fn with_gamma0(mut self, gamma0: Option<f64>) -> Self {
        self.ntra.gamma0 = gamma0;
        self.pgcl.gamma0 = gamma0;
        self.baseline.gamma0 = gamma0;
        self
    }
}

/// Run one solver and package the outcome; errors become `status = error` reports.
pub fn run_solver(
    kind: SolverKind,
    instance: &ProblemInstance,
    x0: &Vector,
    defaults: &Defaults,
) -> RunReport {
    let seed = instance.descriptor.seed;
    let p = instance.composite();
    let start = Instant::now();
    let out = if x0.len() != instance.dim() {
        Err(Error::DimensionMismatch {
            expected: instance.dim(),
            got: x0.len(),
        })
    } else {
        match kind {
            SolverKind::Pgm => pgm_solve(p, x0, &defaults.baseline, seed),
            SolverKind::Panoc => panoc_solve(p, x0, &defaults.baseline, seed),
            SolverKind::Ntra => ntra_solve(p, x0, &defaults.ntra, seed),
            SolverKind::Pgcl => pgcl_solve(p, x0, &defaults.pgcl, seed),
        }
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let descriptor = instance.descriptor.clone();
    match out {
        Ok(run) => RunReport::from_run(kind.name(), descriptor, x0, run, ms),
        Err(e) => RunReport::from_error(kind.name(), descriptor, x0, &e, ms),
    }
}

/// Uniform sample from the unit ball, reproducible from `seed`.
pub fn random_x0(dim: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7830_5eed_0000_0000);
    let dir: Vector = (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let radius = rng.gen::<f64>().powf(1.0 / dim as f64);
    let n = norm(&dir);
    if n == 0.0 {
        dir
    } else {
        dir * (radius / n)
    }
}

/// For each seed build one instance and one starting point, then run every solver
/// from it. Reports are ordered by `(seed, solver)` as given.
pub fn run_sweep(
    config: &ProblemConfig,
    solvers: &[SolverKind],
    seeds: &[u64],
    defaults: &Defaults,
) -> Result<Vec<RunReport>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    if solvers.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one solver is required".into(),
        ));
    }
    let per_seed: Vec<Result<Vec<RunReport>>> = seeds
        .par_iter()
        .map(|&seed| {
            let instance = ProblemDescriptor {
                config: config.clone(),
                seed,
            }
            .build()?;
            let x0 = random_x0(instance.dim(), seed);
            Ok(solvers
                .par_iter()
                .map(|&k| run_solver(k, &instance, &x0, defaults))
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(seeds.len() * solvers.len());
    for r in per_seed {
        out.extend(r?);
    }
    Ok(out)
}

/// Known global optimal value of a problem family, if any.
pub fn known_optimum(config: &ProblemConfig) -> Option<f64> {
    match config {
        ProblemConfig::Toy {
            variant: ToyVariant::QuadraticBox,
        } => Some(-2.0),
        ProblemConfig::Toy {
            variant: ToyVariant::L1Box,
        } => Some(-1.0),
        ProblemConfig::PhaseRetrieval { .. } => Some(0.0),
        ProblemConfig::SparsePca { .. } => None,
    }
}

/// Lower-middle median: element `⌊(n − 1)/2⌋` of the sorted values.
pub fn lower_median<T: PartialOrd + Copy>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of unordered values"));
    Some(v[(v.len() - 1) / 2])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: String,
    pub runs: usize,
    /// Runs that did not end in an error.
    pub completed: usize,
    pub second_order_certified: usize,
    /// Medians of iteration count and every oracle counter.
    pub median_counts: BTreeMap<String, u64>,
    pub median_final_phi: Option<f64>,
    pub count_best_objective: usize,
    pub count_global_optimal: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub problem: ProblemConfig,
    pub phi_star: Option<f64>,
    pub solvers: Vec<SolverSummary>,
}

/// Summarize a homogeneous set of reports (one problem configuration).
pub fn aggregate(reports: &[RunReport], phi_star: Option<f64>) -> Result<Aggregate> {
    let first = reports.first().ok_or(Error::EmptyReports)?;
    if reports
        .iter()
        .any(|r| r.problem.config != first.problem.config)
    {
        return Err(Error::InhomogeneousReports);
    }
    let done = |r: &&RunReport| r.status != Status::Error && r.final_phi.is_some();

    let mut best: BTreeMap<u64, f64> = BTreeMap::new();
    for r in reports.iter().filter(done) {
        let phi = r.final_phi.unwrap_or(f64::INFINITY);
        let e = best.entry(r.seed).or_insert(phi);
        *e = e.min(phi);
    }

    let mut names: Vec<&str> = Vec::new();
    for r in reports {
        if !names.contains(&r.solver.as_str()) {
            names.push(&r.solver);
        }
    }
    let solvers = names
        .into_iter()
        .map(|name| {
            let mine: Vec<&RunReport> = reports.iter().filter(|r| r.solver == name).collect();
            let ok: Vec<&RunReport> = mine.iter().copied().filter(done).collect();
            let mut median_counts = BTreeMap::new();
            let iters: Vec<u64> = ok.iter().map(|r| r.iterations as u64).collect();
            if let Some(m) = lower_median(&iters) {
                median_counts.insert("iterations".to_string(), m);
            }
            for (i, (key, _)) in first.counters.entries().iter().enumerate() {
                let vals: Vec<u64> = ok.iter().map(|r| r.counters.entries()[i].1).collect();
                if let Some(m) = lower_median(&vals) {
                    median_counts.insert(key.to_string(), m);
                }
            }
            let phis: Vec<f64> = ok.iter().filter_map(|r| r.final_phi).collect();
            let count_best_objective = ok
                .iter()
                .filter(|r| {
                    let phi = r.final_phi.unwrap_or(f64::INFINITY);
                    best.get(&r.seed)
                        .is_some_and(|b| phi - b <= OBJECTIVE_TOLERANCE)
                })
                .count();
            let count_global_optimal = phi_star.map(|s| {
                ok.iter()
                    .filter(|r| {
                        r.final_phi
                            .is_some_and(|p| (p - s).abs() <= OBJECTIVE_TOLERANCE)
                    })
                    .count()
            });
            SolverSummary {
                solver: name.to_string(),
                runs: mine.len(),
                completed: ok.len(),
                second_order_certified: ok
                    .iter()
                    .filter(|r| r.status == Status::SecondOrderStationary)
                    .count(),
                median_counts,
                median_final_phi: lower_median(&phis),
                count_best_objective,
                count_global_optimal,
            }
        })
        .collect();
    Ok(Aggregate {
        problem: first.problem.config.clone(),
        phi_star,
        solvers,
    })
}

/// Float formatting shared by all CSV output: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Aggregate {
    /// Long-format CSV with columns `solver,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("solver,metric,value\n");
        for sol in &self.solvers {
            let mut row = |metric: &str, value: String| {
                let _ = writeln!(s, "{},{},{}", sol.solver, metric, value);
            };
            row("runs", sol.runs.to_string());
            row("completed", sol.completed.to_string());
            row(
                "second_order_certified",
                sol.second_order_certified.to_string(),
            );
            for (k, v) in &sol.median_counts {
                row(&format!("median_{k}"), v.to_string());
            }
            if let Some(p) = sol.median_final_phi {
                row("median_final_phi", fmt_float(p));
            }
            row("count_best_objective", sol.count_best_objective.to_string());
            if let Some(c) = sol.count_global_optimal {
                row("count_global_optimal", c.to_string());
            }
        }
        s
    }

    pub fn summary(&self, solver: &str) -> Option<&SolverSummary> {
        self.solvers.iter().find(|s| s.solver == solver)
    }
}

pub fn write_jsonl<W: Write>(mut out: W, reports: &[RunReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<RunReport>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Trajectory CSV with columns `iter,x1,…,xn,fbe,res_inf`.
pub fn trajectory_csv(trajectory: &[TrajectoryPoint]) -> String {
    let n = trajectory.first().map_or(0, |p| p.x.len());
    let mut s = String::from("iter");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    s.push_str(",fbe,res_inf\n");
    for p in trajectory {
        let _ = write!(s, "{}", p.iter);
        for v in &p.x {
            let _ = write!(s, ",{}", fmt_float(*v));
        }
        let _ = writeln!(s, ",{},{}", fmt_float(p.fbe), fmt_float(p.res_inf));
    }
    s
}
