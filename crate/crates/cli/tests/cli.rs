use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nlogis_cli::{columns, Experiment};

fn nlogis(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlogis"))
        .args(args)
        .current_dir(dir)
        .env_remove("NLOGIS_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn csv_headers_are_pinned() {
    let golden = [
        (Experiment::Eigen, "s,r,h,lambda_base,lambda_scaled,ratio,target,rel_error,pass"),
        (
            Experiment::Solve,
            "s,factor,sigma_max,tau,lambda,classification,predicted,min_u,max_u,bound,energy,residual,iterations,pass",
        ),
        (
            Experiment::ThresholdRadius,
            "s,h0,r_star,predicted,rel_gap,lambda_base,bracket_lo,bracket_hi,steps,max_u,pass",
        ),
        (
            Experiment::ExtCrossing,
            "kind,r,s,s_high,lambda_low,lambda_high,difference,sigma,tau,class_low,class_high,predicted_crossing,pass",
        ),
        (
            Experiment::Congruence,
            "domain,s,h,lambda,sigma,classification,expected,min_u,max_u,residual,pass",
        ),
        (Experiment::Abundance, "level,inf_on_ball,ratio,max_u,bound,m0,variation,pass"),
        (Experiment::Beat, "profile,m,classification,beat_nodes,max_excess,max_u,bound,pass"),
        (
            Experiment::Periodic,
            "n,s,tau,classification,expected_constant,max_deviation,min_u,max_u,mean,source_integral,residual,pass",
        ),
        (
            Experiment::Transmission,
            "factor,sigma_max,lambda_star,classification,verdict,positive_local,positive_nonlocal,max_u,energy,residual,pass",
        ),
        (
            Experiment::Strategic,
            "s,eps,r_used,approx_error,harmonic_residual,sigma_gap,equation_residual,fit_margin,support_ok,achieved,pass",
        ),
    ];
    assert_eq!(golden.len(), Experiment::ALL.len());
    for (exp, header) in golden {
        let mut cols = columns(exp).join(",");
        cols.push_str(",pass");
        assert_eq!(cols, header, "{exp}");
    }
}

#[test]
fn eigen_run_writes_the_pinned_header_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlogis(dir.path(), &["eigen", "--h", "0.015625", "--out", "e.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let mut lines = text.split('\n');
    assert_eq!(lines.next(), Some("s,r,h,lambda_base,lambda_scaled,ratio,target,rel_error,pass"));
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 3);
    // every numeric field uses the %.12e layout
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "5.000000000000e-01");
    assert_eq!(row[2], "1.562500000000e-02");
    assert_eq!(stdout(&o), "PASS  scaling                 2/2 rows\n");
}

#[test]
fn output_is_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "solve.json", r#"{"experiment": "solve", "h": 0.015625, "sigma_factors": [0.5, 0.9, 1.1, 2.0]}"#);
    let a = nlogis(dir.path(), &["solve", "--config", &cfg, "--out", "a.csv", "--jobs", "1"]);
    let b = nlogis(dir.path(), &["run", "--config", &cfg, "--out", "b.csv", "--jobs", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let (ta, tb) = (fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 5);
}

#[test]
fn jobs_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nlogis"))
        .args(["eigen", "--h", "0.03125"])
        .current_dir(dir.path())
        .env("NLOGIS_JOBS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--jobs"));
}

#[test]
fn threshold_radius_reports_the_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlogis(dir.path(), &["threshold-radius", "--h", "0.0078125", "--out", "t.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rec = rdr.records().next().unwrap().unwrap();
    let get = |name: &str| -> f64 {
        let i = columns(Experiment::ThresholdRadius).iter().position(|c| *c == name).unwrap();
        rec[i].parse().unwrap()
    };
    let (r_star, predicted, gap, lambda) = (get("r_star"), get("predicted"), get("rel_gap"), get("lambda_base"));
    // λ^{1/(2s)} = λ at s = 1/2
    assert!((predicted - lambda).abs() <= 1e-12 * lambda);
    assert!((gap - (r_star - predicted).abs() / predicted).abs() <= 1e-9);
    assert!(gap <= 0.05);
}

#[test]
fn congruence_emits_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlogis(dir.path(), &["congruence", "--h", "0.0078125", "--out", "c.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    let shape: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[5].as_str())).collect();
    assert_eq!(shape, [("omega1", "trivial"), ("omega2", "trivial"), ("union", "nontrivial")]);
    assert_eq!(stdout(&o).lines().next().unwrap(), "PASS  congruence              3/3 rows");
}

#[test]
fn periodic_constant_state_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlogis(dir.path(), &["periodic", "--out", "p.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "2.500000000000e+00");
    assert!(row[5].parse::<f64>().unwrap() <= 1e-8);
    assert!(stdout(&o).contains("PASS  periodic-constant"));
}

#[test]
fn injected_failing_tolerance_fails_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", r#"{"experiment": "periodic", "checks": {"max_deviation": 1e-300}}"#);
    let o = nlogis(dir.path(), &["periodic", "--config", &cfg, "--out", "p.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL  periodic-constant"), "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",false"));
}

#[test]
fn config_errors_exit_1_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"experiment": "solve", "sgima": 2}"#);
    let o = nlogis(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sgima"));
    assert!(!dir.path().join("solve.csv").exists());
}

#[test]
fn non_convergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // a tolerance below round-off cannot be met
    let cfg = write(dir.path(), "s.json", r#"{"experiment": "solve", "h": 0.03125, "sigma": 50, "tolerances": {"solver_tol": 1e-300}}"#);
    let o = nlogis(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
}

#[test]
fn io_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlogis(dir.path(), &["eigen", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(4));
    fs::write(dir.path().join("blocker"), "").unwrap();
    let o = nlogis(dir.path(), &["eigen", "--h", "0.03125", "--out", "blocker/e.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn help_exits_0_and_usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nlogis(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(nlogis(dir.path(), &["bogus"]).status.code(), Some(1));
}

#[test]
fn suite_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlogis(dir.path(), &["suite", "--out", "res"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    let keys: Vec<&str> = text.lines().map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert_eq!(
        keys,
        [
            "extinction-threshold",
            "congruence",
            "critical-radius",
            "order-crossing",
            "population-bound",
            "abundance",
            "resource-beating",
            "periodic-constant",
            "transmission-threshold",
            "strategic-plan"
        ]
    );
    assert!(text.lines().all(|l| l.starts_with("PASS  ")));
    assert_eq!(fs::read_dir(dir.path().join("res")).unwrap().count(), nlogis_cli::SUITE.len());
}
