use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pcz_core::fixtures::psi;
use pcz_core::io::{read_grid, write_grid, write_sequence};
use pcz_core::{AaSequence, GridFunction, Window};

fn pcz(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcz"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_psi_sequence(path: &Path) {
    let seq = AaSequence::from_scalar_fn(Window::new(-8, 8), |n| psi(n as f64)).unwrap();
    let mut buf = Vec::new();
    write_sequence(&seq, &mut buf, 17).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn extend_linear_keeps_integer_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("psi_seq.csv");
    write_psi_sequence(&input);
    let out = pcz(dir.path(), &["extend", "--kind", "linear", "--in", input.to_str().unwrap(), "--samples-per-unit", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let seq_text = fs::read_to_string(&input).unwrap();
    let expected: Vec<(String, String)> = seq_text
        .lines()
        .skip(1)
        .map(|l| {
            let (n, v) = l.split_once(',').unwrap();
            (n.to_string(), v.to_string())
        })
        .collect();
    let grid_text = fs::read_to_string(dir.path().join("extend.csv")).unwrap();
    let mut seen = 0;
    for line in grid_text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if let Some((_, v)) = expected.iter().find(|(n, _)| n == cols[0]) {
            assert_eq!(cols[1], v, "row {line}");
            seen += 1;
        }
    }
    // every integer appears once as a sample and once as a left limit, except the ends
    assert_eq!(seen, 2 * expected.len() - 2);
    let f = read_grid(grid_text.as_bytes()).unwrap();
    assert_eq!(f.window(), Window::new(-8, 8));
}

#[test]
fn heat_matches_decay_of_sine() {
    let dir = tempfile::tempdir().unwrap();
    let sin = GridFunction::from_continuous_scalar(Window::new(-16, 16), 32, f64::sin).unwrap();
    let input = dir.path().join("sin.csv");
    let mut buf = Vec::new();
    write_grid(&sin, &mut buf, 17).unwrap();
    fs::write(&input, buf).unwrap();

    let out = pcz(dir.path(), &["heat", "--kernel", "gauss:0.5", "--in", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let u = read_grid(fs::File::open(dir.path().join("heat.csv")).unwrap()).unwrap();
    let w = u.window();
    for n in w.lo..w.hi {
        for j in 0..32 {
            let t = n as f64 + j as f64 / 32.0;
            assert!((u.sample(n, j)[0] - (-0.5f64).exp() * t.sin()).abs() < 1e-6);
        }
    }
}

#[test]
fn conv_exp_runs_causally() {
    let dir = tempfile::tempdir().unwrap();
    let one = GridFunction::constant(Window::new(0, 30), 16, &[1.0]).unwrap();
    let input = dir.path().join("one.csv");
    let mut buf = Vec::new();
    write_grid(&one, &mut buf, 17).unwrap();
    fs::write(&input, buf).unwrap();
    let out = pcz(dir.path(), &["conv", "--kernel", "exp", "--in", input.to_str().unwrap(), "--trunc-eps", "1e-8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let y = read_grid(fs::File::open(dir.path().join("conv.csv")).unwrap()).unwrap();
    assert!(y.window().lo > 0);
    assert!(y.map_points(1, |_, v| vec![v[0] - 1.0]).unwrap().sup_norm() < 1e-6);
}

#[test]
fn diagnose_writes_stable_fields() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("psi_seq.csv");
    write_psi_sequence(&input);
    assert!(pcz(dir.path(), &["extend", "--kind", "step", "--in", input.to_str().unwrap(), "--samples-per-unit", "8"])
        .status
        .success());
    let decay = GridFunction::from_continuous_scalar(Window::new(0, 9), 8, |t| (-t).exp()).unwrap();
    let h = dir.path().join("h.csv");
    let mut buf = Vec::new();
    write_grid(&decay, &mut buf, 17).unwrap();
    fs::write(&h, buf).unwrap();

    let grid = dir.path().join("extend.csv");
    let out = pcz(
        dir.path(),
        &["diagnose", "--in", grid.to_str().unwrap(), "--h", h.to_str().unwrap(), "--max-shift", "4"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("diagnose.json")).unwrap()).unwrap();
    for key in [
        "shifts_tested",
        "best_shift",
        "forward_defect",
        "backward_defect",
        "modulus_table",
        "verdict",
        "g_norm",
        "h_norm",
        "f_norm",
        "bound_satisfied",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["verdict"], "fails-UC");
    assert_eq!(report["bound_satisfied"], true);
}

#[test]
fn depca_ivp_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcz(
        dir.path(),
        &["depca", "--mode", "ivp", "--a", "1", "--b", "0.5", "--window", "0:2", "--y0", "1", "--steps", "256"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let y = read_grid(fs::File::open(dir.path().join("depca_ivp.csv")).unwrap()).unwrap();
    let e = 1f64.exp();
    assert!((y.left_limit(1).unwrap()[0] - (e + 0.5 * (e - 1.0))).abs() < 1e-8);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("depca_ivp_report.json")).unwrap()).unwrap();
    assert!(report["residual_report"]["max_residual"].as_f64().unwrap() < 1e-3);
    assert!(report["continuity_defect"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn depca_negative_window_and_lw() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcz(
        dir.path(),
        &["depca", "--mode", "lw", "--a", "1", "--f", "1", "--gamma", "0.5", "--window", "-2:2", "--steps", "64"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let y = read_grid(fs::File::open(dir.path().join("depca_lw.csv")).unwrap()).unwrap();
    assert_eq!(y.window(), Window::new(-2, 2));
    assert!((y.sample(0, 0)[0] - 0.7035).abs() < 1e-3);
}

#[test]
fn refused_dichotomy_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcz(dir.path(), &["depca", "--mode", "bounded", "--a", "0", "--f", "1", "--steps", "16"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcz(dir.path(), &["extend", "--kind", "linear", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = pcz(dir.path(), &["heat", "--kernel", "exp", "--in", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let out = pcz(dir.path(), &["--precision", "40", "demo"]);
    assert_eq!(out.status.code(), Some(2));

    let out = pcz(dir.path(), &["depca", "--mode", "ivp", "--a", "cosh"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("psi_seq.csv");
    write_psi_sequence(&input);
    let args = ["--seed", "0x5EED", "extend", "--kind", "two-segment", "--in", input.to_str().unwrap(), "--samples-per-unit", "6"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(pcz(&a, &args).status.success());
    assert!(pcz(&b, &args).status.success());
    assert_eq!(fs::read(a.join("extend.csv")).unwrap(), fs::read(b.join("extend.csv")).unwrap());
}

#[test]
fn demo_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcz(dir.path(), &["demo"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("criterion,check,value,threshold,status"));
    for c in 1..=10 {
        assert!(summary.lines().any(|l| l.starts_with(&format!("{c},"))), "criterion {c} missing");
    }
    assert!(dir.path().join("diagnose_psi_linear.json").exists());
}
