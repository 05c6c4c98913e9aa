//! End-to-end checks of the binary: output contents, formats, exit codes,
//! and bit-reproducibility under fixed seeds.

use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use redsim::distributions::ServiceDistribution;
use redsim::traces::{synth_trace, trace_to_csv};

fn redsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redsim")).args(args).output().expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = redsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn analyze_prints_closed_form_mean() {
    let csv = stdout_of(&["analyze", "sexp:delta=0.05,mu=1", "--n", "100", "--b", "5"]);
    assert_eq!(csv.lines().next().unwrap(), "n,b,mean,cov");
    assert!(csv.contains("3.283333333333333"), "{csv}");

    let csv = stdout_of(&["analyze", "pareto:sigma=1,alpha=5", "--n", "100", "--b", "100"]);
    let mean: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((mean - 2.9267509397748075).abs() < 1e-12);
}

#[test]
fn sweep_flags_argmin_row() {
    let csv = stdout_of(&["sweep", "sexp:delta=0.05,mu=1", "--n", "100", "--metric", "mean"]);
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0], "B,redundancy,metric,is_argmin");
    let flagged: Vec<&&str> = lines.iter().filter(|l| l.ends_with(",true")).collect();
    assert_eq!(flagged.len(), 1);
    assert!(flagged[0].starts_with("5,"));
}

#[test]
fn covering_prints_exact_fraction() {
    assert_eq!(stdout_of(&["covering", "--n", "3", "--b", "2"]), "3/4 (0.75)\n");
}

#[test]
fn formats_carry_identical_numbers() {
    let csv = stdout_of(&["sweep", "sexp:delta=0.05,mu=1", "--n", "100"]);
    let json = stdout_of(&["sweep", "sexp:delta=0.05,mu=1", "--n", "100", "--format", "json"]);
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = parsed["rows"].as_array().unwrap();
    let csv_rows: Vec<&str> = csv.trim_end().lines().skip(1).collect();
    assert_eq!(rows.len(), csv_rows.len());
    for (jrow, crow) in rows.iter().zip(csv_rows) {
        let fields: Vec<&str> = crow.split(',').collect();
        assert_eq!(jrow["b"].as_u64().unwrap().to_string(), fields[0]);
        let csv_value: f64 = fields[2].parse().unwrap();
        assert_eq!(jrow["value"].as_f64().unwrap(), csv_value);
    }
    assert_eq!(parsed["argmin_b"], 5);
    assert_eq!(parsed["regime"], "interior");
}

#[test]
fn optimize_reports_regime_and_thresholds() {
    let json = stdout_of(&[
        "optimize",
        "sexp:delta=0.05,mu=1",
        "--n",
        "100",
        "--metric",
        "mean",
        "--format",
        "json",
    ]);
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["argmin_b"], 5);
    assert_eq!(parsed["regime"], "interior");
    assert_eq!(parsed["sexp_fast_b"], 5);
    assert_eq!(parsed["sexp_regime_mean"]["label"], "interior");
    assert_eq!(parsed["sexp_regime_mean"]["t_diversity"], 0.01);

    let json = stdout_of(&[
        "optimize",
        "pareto:sigma=1,alpha=5",
        "--n",
        "100",
        "--metric",
        "mean",
        "--format",
        "json",
    ]);
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["regime"], "full_parallelism");
    let star = parsed["pareto_alpha_star"].as_f64().unwrap();
    assert!((4.5..=4.9).contains(&star));
}

#[test]
fn simulate_is_bit_reproducible_across_threads() {
    let args = ["simulate", "exp:mu=1", "--n", "20", "--b", "4", "--reps", "20000", "--seed", "9"];
    let one = stdout_of(&[&args[..], &["--threads", "1"]].concat());
    let two = stdout_of(&[&args[..], &["--threads", "2"]].concat());
    let again = stdout_of(&[&args[..], &["--threads", "2"]].concat());
    assert_eq!(one, two);
    assert_eq!(two, again);
    assert!(one.starts_with("mean,std,cov,q50,q90,q99,replications\n"));
}

#[test]
fn simulate_accepts_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let plan = redsim::assignment::balanced_plan(6, 3).unwrap();
    std::fs::write(&path, serde_json::to_string(&plan).unwrap()).unwrap();
    let out = stdout_of(&[
        "simulate",
        "exp:mu=1",
        "--plan",
        path.to_str().unwrap(),
        "--reps",
        "5000",
        "--format",
        "json",
    ]);
    let parsed: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(parsed["replications"], 5000);
    assert!(parsed["mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn trace_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synth.csv");
    let dist = ServiceDistribution::pareto(1.0, 1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records = synth_trace(&dist, 1, 1_000, &mut rng);
    std::fs::write(&path, trace_to_csv(&records)).unwrap();

    let ccdf = stdout_of(&["trace-ccdf", "--file", path.to_str().unwrap()]);
    assert_eq!(ccdf.lines().next().unwrap(), "x,ccdf");
    assert!(ccdf.trim_end().lines().last().unwrap().ends_with("0.00000000e0"));

    let curve = stdout_of(&[
        "trace-experiment",
        "--file",
        path.to_str().unwrap(),
        "--n",
        "100",
        "--reps",
        "2000",
    ]);
    let lines: Vec<&str> = curve.trim_end().lines().collect();
    assert_eq!(lines[0], "B,normalized_mean,stderr");
    assert_eq!(lines.len(), 10);
    let last: Vec<&str> = lines[9].split(',').collect();
    assert_eq!(last[0], "100");
    assert_eq!(last[1].parse::<f64>().unwrap(), 1.0);

    // output file matches stdout byte for byte
    let out_path = dir.path().join("curve.csv");
    let out = redsim(&[
        "trace-experiment",
        "--file",
        path.to_str().unwrap(),
        "--n",
        "100",
        "--reps",
        "2000",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), curve);
}

#[test]
fn exit_codes_distinguish_usage_and_domain_errors() {
    // unknown subcommand -> usage error
    assert_eq!(redsim(&["frobnicate"]).status.code(), Some(1));
    // missing required flag -> usage error
    assert_eq!(redsim(&["analyze", "exp:mu=1", "--n", "100"]).status.code(), Some(1));
    // infinite-mean guard -> domain error, guard named on stderr
    let out = redsim(&["analyze", "pareto:sigma=1,alpha=1", "--n", "2", "--b", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infinite mean"));
    // unparsable distribution spec -> domain error
    assert_eq!(redsim(&["analyze", "gauss:mu=1", "--n", "4", "--b", "2"]).status.code(), Some(2));
    // missing trace file -> domain error
    assert_eq!(
        redsim(&["trace-ccdf", "--file", "/nonexistent/trace.csv"]).status.code(),
        Some(2)
    );
    // help is not an error
    assert_eq!(redsim(&["--help"]).status.code(), Some(0));
}
