//! End-to-end runs of the `dgocp` binary.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use dgocp::builtin::LinearLq;

fn dgocp(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dgocp"));
    cmd.args(args).env_remove("DGOCP_QUAD_POINTS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn summary(dir: &Path) -> HashMap<String, String> {
    std::fs::read_to_string(dir.join("summary.txt"))
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn solve_linear_lq_reaches_closed_form_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = dgocp(&["solve", "--problem", "linear-lq", "--order", "2", "--intervals", "10", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["converged"], "true");
    let cost: f64 = s["cost"].parse().unwrap();
    let oracle = 0.5 * common::simpson(|t| LinearLq::exact_state(t).powi(2) + LinearLq::exact_control(t).powi(2), 0.0, 1.0, 1_000_000);
    assert!((cost - oracle).abs() < 1e-6, "{cost} vs {oracle}");

    for name in ["u.csv", "x.csv", "lambda.csv", "iterations.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let samples = std::fs::read_to_string(dir.path().join("x_samples.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("t,x_1"));
    assert_eq!(samples.lines().count(), 1 + 401);
    let jumps = std::fs::read_to_string(dir.path().join("jumps.csv")).unwrap();
    assert_eq!(jumps.lines().count(), 1 + 9);
    let x = dgocp::mesh::DGFunction::read_csv(std::io::BufReader::new(std::fs::File::open(dir.path().join("x.csv")).unwrap())).unwrap();
    assert_eq!((x.partition().len(), x.degree()), (10, 2));
}

#[test]
fn solve_reports_errors_against_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dgocp(&["solve", "--problem", "linear-lq", "--order", "1", "--h", "0.1", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path());
    assert_eq!(s["err_u"], "6.2543e-04");
    assert_eq!(s["err_x"], "1.9455e-03");
}

#[test]
fn usage_errors() {
    assert_eq!(dgocp(&["solve", "--order", "1", "--intervals", "4"], &[]).status.code(), Some(2));
    assert_eq!(dgocp(&["solve", "--problem", "linear-lq", "--bogus"], &[]).status.code(), Some(2));
    assert_eq!(dgocp(&["convergence", "--problem", "unknown"], &[]).status.code(), Some(2));
    let bad_env = dgocp(&["verify", "--problem", "linear-lq", "--trials", "1"], &[("DGOCP_QUAD_POINTS", "x")]);
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn quadrature_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dgocp(&["solve", "--problem", "linear-lq", "--intervals", "4", "--out", d], &[("DGOCP_QUAD_POINTS", "7")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(dir.path())["quad_points"], "7");
    let out = dgocp(&["solve", "--problem", "linear-lq", "--intervals", "4", "--out", d, "--quad-points", "5"], &[("DGOCP_QUAD_POINTS", "7")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(dir.path())["quad_points"], "5");
}

#[test]
fn convergence_csv_is_deterministic() {
    let args = ["convergence", "--problem", "nonlinear-quadratic", "--orders", "1,2", "--levels", "3"];
    let a = dgocp(&args, &[]);
    let b = dgocp(&args, &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,h,err_x,err_u,rate_x,rate_u"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[3][0], "2");
    assert_eq!(rows[0][4], "");
    assert!(!rows[1][4].is_empty());
}

#[test]
fn convergence_writes_file_and_flags_exact_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conv.csv");
    let out = dgocp(&["convergence", "--problem", "polynomial-check", "--orders", "2", "--levels", "3", "--out", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(path).unwrap();
    for row in text.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert!(cols[2].parse::<f64>().unwrap() < 1e-12, "{row}");
        assert_eq!(cols[4], "", "{row}");
    }
}

#[test]
fn stall_exits_3_with_partial_csv() {
    let out = dgocp(&["convergence", "--problem", "linear-lq", "--orders", "1", "--levels", "2", "--corrupt", "gradient-sign"], &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("r,h,err_x,err_u,rate_x,rate_u"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stall"));
}

#[test]
fn verify_passes_and_detects_corruption() {
    let ok = dgocp(&["verify", "--problem", "linear-lq", "--order", "1", "--intervals", "8", "--seed", "42"], &[]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| l.contains("PASS")));

    let nl = dgocp(&["verify", "--problem", "nonlinear-quadratic", "--order", "2", "--intervals", "8"], &[]);
    assert_eq!(nl.status.code(), Some(0));

    let bad = dgocp(&["verify", "--problem", "linear-lq", "--corrupt", "fu"], &[]);
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8(bad.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("gradient") && text.contains("FAIL"));
}
