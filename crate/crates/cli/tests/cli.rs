use std::process::{Command, Output};

use chebspec_core::{ReportKind, RunReport};

fn chebspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chebspec"))
        .args(args)
        .env_remove("CHEBSPEC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn report(out: &Output) -> RunReport {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    RunReport::from_csv(&stdout(out)).unwrap()
}

#[test]
fn tableau_json() {
    let out = chebspec(&["tableau", "--s", "3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["s"], 3);
    assert_eq!(v["k"], 3);
    let b: Vec<f64> = v["b"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (got, want) in b.iter().zip([2.0 / 9.0, 5.0 / 9.0, 2.0 / 9.0]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert_eq!(v["A"].as_array().unwrap().len(), 3);
    assert_eq!(v["c"].as_array().unwrap().len(), 3);
    assert!(v["X"]["triplets"].is_array());
}

#[test]
fn tableau_csv_generalized() {
    let out = chebspec(&["tableau", "--s", "2", "--k", "4", "--csv"]);
    let text = stdout(&out);
    assert!(text.starts_with("# kind=tableau\n"));
    let r = report(&out);
    assert_eq!(r.kind, ReportKind::Tableau);
    assert_eq!(r.rows.len(), 4);
    assert_eq!(r.meta("k"), Some("4"));
}

#[test]
fn solve_writes_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let out = chebspec(&[
        "solve",
        "--problem",
        "kepler",
        "--s",
        "8",
        "--h",
        "0.1",
        "--t-end",
        "1",
        "--dense",
        "--fp-tol",
        "1e-13",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r = RunReport::from_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r.kind, ReportKind::Trajectory);
    assert_eq!(r.rows.len(), 11);
    assert_eq!(r.meta("path"), Some("dense"));
    assert_eq!(r.meta("fp_tol"), Some("1e-13"));
    assert!(r.column("H").unwrap().iter().all(|h| (h + 0.5).abs() < 1e-9));
}

#[test]
fn solve_json() {
    let out = chebspec(&[
        "solve",
        "--problem",
        "linear:-1",
        "--s",
        "4",
        "--h",
        "0.1",
        "--t-end",
        "1",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["kind"], "trajectory");
    let last = v["rows"].as_array().unwrap().last().unwrap();
    assert!((last[1].as_f64().unwrap() - (-1f64).exp()).abs() < 1e-6);
}

#[test]
fn divergence_exits_with_two() {
    let out = chebspec(&[
        "solve",
        "--problem",
        "linear:-10000",
        "--s",
        "2",
        "--h",
        "1",
        "--t-end",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = chebspec(&[
        "convergence",
        "--problem",
        "linear:-10000",
        "--s-list",
        "2",
        "--n-list",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(chebspec(&["tableau"]).status.code(), Some(1));
    assert_eq!(
        chebspec(&["tableau", "--s", "3", "--json", "--csv"]).status.code(),
        Some(1)
    );
    assert_eq!(chebspec(&["tableau", "--s", "4", "--k", "2"]).status.code(), Some(1));
    assert_eq!(
        chebspec(&["solve", "--problem", "lorenz", "--s", "2", "--h", "0.1", "--t-end", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        chebspec(&["solve", "--s", "2", "--h", "0.3", "--t-end", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(chebspec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(chebspec(&["--help"]).status.code(), Some(0));
}

#[test]
fn thread_cap_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_chebspec"))
            .args(["convergence", "--s-list", "2,4", "--n-list", "50,100"])
            .env("CHEBSPEC_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = report(&run("1"));
    let two = report(&run("2"));
    let cells = |r: &RunReport| r.rows.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(cells(&one), cells(&two));
    assert_eq!(run("0").status.code(), Some(1));
    assert_eq!(run("many").status.code(), Some(1));
}

#[test]
fn study_commands() {
    let r = report(&chebspec(&[
        "convergence",
        "--problem",
        "kepler",
        "--s-list",
        "3,4",
        "--n-list",
        "200,400",
    ]));
    assert_eq!(r.columns, ["n", "err_s3", "rate_s3", "err_s4", "rate_s4"]);
    assert!((r.rows[1][2] - 4.0).abs() < 0.2);

    let r = report(&chebspec(&["longrun", "--s", "50", "--n", "6", "--periods", "2"]));
    assert_eq!(r.kind, ReportKind::LongRun);
    assert!(r.column("err").unwrap().iter().all(|&e| e <= 1e-11));

    let r = report(&chebspec(&[
        "decay",
        "--s",
        "30",
        "--h-list",
        "0.6283185307179586,0.3141592653589793",
    ]));
    assert_eq!(r.rows.len(), 30);
    let rho0 = r.meta_f64("rho_hat.0").unwrap();
    let rho1 = r.meta_f64("rho_hat.1").unwrap();
    assert!(rho1 > rho0);

    let r = report(&chebspec(&[
        "drift",
        "--problem",
        "harmonic:2",
        "--s",
        "6",
        "--h",
        "0.1",
        "--t-end",
        "10",
    ]));
    assert!(r.meta_f64("max_drift").unwrap() < 1e-12);

    let r = report(&chebspec(&["stability", "--s-max", "5"]));
    assert_eq!(r.rows.len(), 5);
    assert!(r.column("min_re_eig").unwrap().iter().all(|&v| v > 0.0));
}
