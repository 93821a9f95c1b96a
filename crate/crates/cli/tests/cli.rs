use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nsaddle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsaddle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn final_point(dir: &Path) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("runs.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    v["final_point"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

/// fbe column of a trajectory CSV with header `iter,x1,x2,fbe,res_inf`.
fn fbe_column(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,x1,x2,fbe,res_inf"));
    lines
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn toy_pgm_stops_at_the_saddle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nsaddle(&[
        "toy",
        "--variant",
        "quadratic_box",
        "--solver",
        "pgm",
        "--x0",
        "0.1,0",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(close(&final_point(dir.path()), &[1.0, 0.0], 1e-6));
    assert!(dir.path().join("trajectory_pgm.csv").exists());
}

#[test]
fn toy_second_order_solvers_reach_the_corner() {
    for solver in ["ntra", "pgcl"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let o = nsaddle(&[
            "toy",
            "--variant",
            "quadratic_box",
            "--solver",
            solver,
            "--x0",
            "0.1,0",
            "--out",
            out,
        ]);
        assert!(o.status.success());
        assert!(
            close(&final_point(dir.path()), &[1.0, 1.0], 1e-6),
            "{solver}"
        );
    }
}

#[test]
fn toy_trajectories_have_nonincreasing_fbe() {
    for solver in ["panoc", "ntra", "pgcl"] {
        for (variant, x0) in [("quadratic_box", "0.1,0"), ("l1_box", "-0.4,0")] {
            let dir = tempfile::tempdir().unwrap();
            let x0_arg = format!("--x0={x0}");
            let o = nsaddle(&[
                "toy",
                "--variant",
                variant,
                "--solver",
                solver,
                &x0_arg,
                "--out",
                dir.path().to_str().unwrap(),
            ]);
            assert!(o.status.success());
            let fbe = fbe_column(&dir.path().join(format!("trajectory_{solver}.csv")));
            assert!(!fbe.is_empty());
            for w in fbe.windows(2) {
                assert!(w[1] <= w[0], "{solver} on {variant}: {fbe:?}");
            }
        }
    }
}

#[test]
fn check_passes() {
    let o = nsaddle(&["check"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().any(|l| l.starts_with("PASS ")));
    assert!(!stdout.lines().any(|l| l.starts_with("FAIL ")));
}

#[test]
fn usage_errors_exit_with_two() {
    let o = nsaddle(&["toy", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = nsaddle(&[
        "toy",
        "--variant",
        "nope",
        "--solver",
        "pgm",
        "--x0",
        "0,0",
        "--out",
        "x",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_reports_and_is_deterministic() {
    let run = |dir: &Path| {
        let o = nsaddle(&[
            "phase-retrieval",
            "--n",
            "8",
            "--m",
            "80",
            "--seeds",
            "3",
            "--solvers",
            "panoc,ntra,pgcl",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    let agg_a = fs::read_to_string(a.path().join("aggregate.json")).unwrap();
    assert_eq!(
        agg_a,
        fs::read_to_string(b.path().join("aggregate.json")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(a.path().join("aggregate.csv")).unwrap(),
        fs::read_to_string(b.path().join("aggregate.csv")).unwrap()
    );
    let csv = fs::read_to_string(a.path().join("aggregate.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("solver,metric,value"));

    let runs = fs::read_to_string(a.path().join("runs.jsonl")).unwrap();
    let canon = |text: &str| -> Vec<serde_json::Value> {
        text.lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v["wall_time_ms"] = 0.0.into();
                v
            })
            .collect()
    };
    let rows = canon(&runs);
    assert_eq!(rows.len(), 9);
    assert_eq!(
        rows,
        canon(&fs::read_to_string(b.path().join("runs.jsonl")).unwrap())
    );
    // One shared starting point per seed.
    for seed_rows in rows.chunks(3) {
        assert!(seed_rows
            .iter()
            .all(|r| r["x0_hash"] == seed_rows[0]["x0_hash"]));
    }
}

#[test]
fn aggregate_round_trips_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let sweep_dir = dir.path().join("sweep");
    let o = nsaddle(&[
        "sparse-pca",
        "--n",
        "12",
        "--seeds",
        "2",
        "--solvers",
        "pgm,ntra",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = dir.path().join("again");
    let o = nsaddle(&[
        "aggregate",
        "--in",
        sweep_dir.join("runs.jsonl").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(sweep_dir.join("aggregate.csv")).unwrap(),
        fs::read_to_string(again.join("aggregate.csv")).unwrap()
    );
}

#[test]
fn aggregate_of_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = nsaddle(&[
        "aggregate",
        "--in",
        dir.path().join("none.jsonl").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
