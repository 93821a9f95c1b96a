//! `nsaddle` command line: single toy runs, seeded sweeps, the invariant suite and
//! re-aggregation of stored run reports.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsaddle::check::run_checks;
use nsaddle::harness::{
    aggregate, known_optimum, read_jsonl, run_solver, run_sweep, trajectory_csv, write_jsonl,
    Aggregate, Defaults, SolverKind,
};
use nsaddle::pgcl::DirectionMode;
use nsaddle::problems::{
    toy_box, ProblemConfig, ToyVariant, DEFAULT_SPARSE_PCA_DENSITY, DEFAULT_SPARSE_PCA_KAPPA,
};
use nsaddle::report::RunReport;
use nsaddle::{Error, Result, Vector};

#[derive(Parser, Debug)]
#[command(
    name = "nsaddle",
    version,
    about = "Saddle-escaping proximal-gradient solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One run on a two-dimensional toy landscape, with its trajectory.
    Toy {
        #[arg(long, value_parser = parse_variant)]
        variant: ToyVariant,
        #[arg(long, value_parser = parse_solver)]
        solver: SolverKind,
        /// Starting point, e.g. `0.1,0`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        x0: Vector,
        /// Initial stepsize; estimated from the Lipschitz constant when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded sweep over sparse PCA instances.
    SparsePca {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SPARSE_PCA_KAPPA)]
        kappa: f64,
        #[arg(long, default_value_t = DEFAULT_SPARSE_PCA_DENSITY)]
        density: f64,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Seeded sweep over real phase retrieval instances.
    PhaseRetrieval {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 300)]
        m: usize,
        /// Negative-curvature step scale for PGCL.
        #[arg(long, default_value_t = 1.0)]
        sbar: f64,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Run the invariant suite; exits with 1 if any item fails.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-aggregate a stored `runs.jsonl`.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    /// Number of seeds; seeds `first-seed .. first-seed + seeds` are used.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Comma-separated subset of pgm, panoc, ntra, pgcl.
    #[arg(long, value_delimiter = ',', value_parser = parse_solver, default_value = "pgm,panoc,ntra,pgcl")]
    solvers: Vec<SolverKind>,
    /// Fast direction used by PGCL.
    #[arg(long, value_parser = parse_direction, default_value = "newton_cg")]
    pgcl_direction: DirectionMode,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> std::result::Result<ToyVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_solver(s: &str) -> std::result::Result<SolverKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_direction(s: &str) -> std::result::Result<DirectionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_point(s: &str) -> std::result::Result<Vector, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Vector::from)
}

fn write_reports(dir: &Path, reports: &[RunReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("runs.jsonl"))?);
    write_jsonl(&mut w, reports)?;
    w.flush()?;
    Ok(())
}

fn write_aggregate(dir: &Path, agg: &Aggregate) -> Result<()> {
    fs::write(dir.join("aggregate.csv"), agg.to_csv())?;
    let json = serde_json::to_string_pretty(agg)?;
    fs::write(dir.join("aggregate.json"), json + "\n")?;
    Ok(())
}

fn print_aggregate(agg: &Aggregate) {
    println!(
        "{:<6} {:>5} {:>9} {:>9} {:>9} {:>9} {:>6} {:>6}",
        "solver", "runs", "certified", "iters", "hvp_f", "phi", "best", "global"
    );
    for s in &agg.solvers {
        let get = |k: &str| s.median_counts.get(k).map_or("-".into(), |v| v.to_string());
        println!(
            "{:<6} {:>5} {:>9} {:>9} {:>9} {:>9} {:>6} {:>6}",
            s.solver,
            s.runs,
            s.second_order_certified,
            get("iterations"),
            get("hvp_f"),
            s.median_final_phi
                .map_or("-".into(), |v| format!("{v:.3e}")),
            s.count_best_objective,
            s.count_global_optimal.map_or("-".into(), |v| v.to_string()),
        );
    }
}

fn toy(
    variant: ToyVariant,
    solver: SolverKind,
    x0: &Vector,
    gamma: Option<f64>,
    out: &Path,
) -> Result<()> {
    let instance = toy_box(variant)?;
    let defaults = Defaults::default().with_trajectories().with_gamma0(gamma);
    let report = run_solver(solver, &instance, x0, &defaults);
    fs::create_dir_all(out)?;
    if let Some(t) = &report.trajectory {
        fs::write(
            out.join(format!("trajectory_{}.csv", solver.name())),
            trajectory_csv(t),
        )?;
    }
    write_reports(out, std::slice::from_ref(&report))?;
    if let Some(e) = &report.error {
        return Err(Error::InvalidConfig(format!("{solver} failed: {e}")));
    }
    let point = report.final_point.as_deref().unwrap_or(&[]);
    println!(
        "{solver}: status {:?}, iterations {}, final point {:?}, phi {}",
        report.status,
        report.iterations,
        point,
        report.final_phi.map_or("-".into(), |v| format!("{v:.12}")),
    );
    Ok(())
}

fn sweep(config: ProblemConfig, args: &SweepArgs, defaults: Defaults) -> Result<()> {
    let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
    let reports = run_sweep(&config, &args.solvers, &seeds, &defaults)?;
    fs::create_dir_all(&args.out)?;
    write_reports(&args.out, &reports)?;
    let agg = aggregate(&reports, known_optimum(&config))?;
    write_aggregate(&args.out, &agg)?;
    print_aggregate(&agg);
    Ok(())
}

fn sweep_defaults(direction: DirectionMode) -> Defaults {
    let mut d = Defaults::default();
    d.pgcl.direction_mode = direction;
    d
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Toy {
            variant,
            solver,
            x0,
            gamma,
            out,
        } => toy(variant, solver, &x0, gamma, &out)?,
        Command::SparsePca {
            n,
            kappa,
            density,
            sweep: args,
        } => {
            let config = ProblemConfig::SparsePca { n, kappa, density };
            sweep(config, &args, sweep_defaults(args.pgcl_direction))?;
        }
        Command::PhaseRetrieval {
            n,
            m,
            sbar,
            sweep: args,
        } => {
            let mut defaults = sweep_defaults(args.pgcl_direction);
            defaults.pgcl.sbar = sbar;
            sweep(ProblemConfig::PhaseRetrieval { n, m }, &args, defaults)?;
        }
        Command::Check { seed } => {
            let items = run_checks(seed);
            let failed = items.iter().filter(|i| !i.passed).count();
            for i in &items {
                let tag = if i.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", i.name, i.detail);
            }
            println!("{} passed, {failed} failed", items.len() - failed);
            if failed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Aggregate { input, out } => {
            let reports = read_jsonl(BufReader::new(File::open(&input)?))?;
            let config = reports
                .first()
                .map(|r| r.problem.config.clone())
                .ok_or(Error::EmptyReports)?;
            let agg = aggregate(&reports, known_optimum(&config))?;
            fs::create_dir_all(&out)?;
            write_aggregate(&out, &agg)?;
            print_aggregate(&agg);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
