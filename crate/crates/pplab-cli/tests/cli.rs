//! End-to-end tests of the `pplab` binary: exit-code contract, schema
//! rejection, manifest determinism, and the output file formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pplab"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn solve_config(dir: &Path, potential: &str, time_grid: &str, out_name: &str) -> PathBuf {
    let cfg = format!(
        r#"{{
  "problem": {{
    "n": 1,
    "half_width": 40.0,
    "points_per_dim": 512,
    "potential": {potential},
    "initial": {{"c0": 1.0, "delta": 0.0, "alpha": 0.0, "d_pow": 0.0}}
  }},
  "solver": {{"time_grid": {time_grid}}},
  "outputs": {{"directory": "{}"}},
  "seed": 7
}}"#,
        dir.join(out_name).display()
    );
    let path = dir.join(format!("{out_name}.json"));
    write(&path, &cfg);
    path
}

const ZERO_POTENTIAL: &str = r#"{"sigma": 0.0, "lambda": {"family": "constant", "c": 0.0}, "r0": 0.0, "mode": "exact_power"}"#;
const HALF_POTENTIAL: &str = r#"{"sigma": 0.5, "lambda": {"family": "constant", "c": 0.5}, "r0": 0.0, "mode": "exact_power"}"#;
const SUPER_POTENTIAL: &str = r#"{"sigma": 2.0, "lambda": {"family": "constant", "c": 1.0}, "r0": 0.0, "mode": "exact_power"}"#;

#[test]
fn solve_constant_solution_exits_zero_with_unit_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = solve_config(tmp.path(), ZERO_POTENTIAL, "[0.5, 1.0]", "const");
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // snapshots are 1 within 1e-6 on the interior (|x| <= L/2)
    let csv = std::fs::read_to_string(tmp.path().join("const/snapshot_001.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        let x: f64 = parts.next().unwrap().parse().unwrap();
        let v: f64 = parts.next().unwrap().parse().unwrap();
        if x.abs() <= 20.0 {
            assert!((v - 1.0).abs() < 1e-6, "x={x}: {v}");
        }
    }
    assert!(tmp.path().join("const/manifest.json").exists());
}

#[test]
fn solve_manifests_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = solve_config(tmp.path(), HALF_POTENTIAL, "[0.5]", "determinism");
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    assert_eq!(code(&run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_a.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_b.to_str().unwrap()])), 0);
    let a = std::fs::read(out_a.join("manifest.json")).unwrap();
    let b = std::fs::read(out_b.join("manifest.json")).unwrap();
    assert_eq!(a, b, "manifests differ between identical runs");
    let sa = std::fs::read(out_a.join("snapshot_000.bin")).unwrap();
    let sb = std::fs::read(out_b.join("snapshot_000.bin")).unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn solve_sigma_half_residuals_are_small() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = solve_config(tmp.path(), HALF_POTENTIAL, "[0.5, 1.0]", "half");
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("half/manifest.json")).unwrap())
            .unwrap();
    for r in manifest["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() < 1e-6, "residual {r}");
    }
}

#[test]
fn forced_supercritical_run_exits_diverged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = solve_config(tmp.path(), SUPER_POTENTIAL, "[1.0]", "forced");
    // without the flag: refused as a configuration error
    let refused = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&refused), 64);
    // with the flag: runs and reports divergence
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--force-unsafe"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn schema_violation_exits_64_with_line_anchor() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    write(
        &path,
        r#"{
  "problem": {
    "n": 1,
    "half_width": 10.0,
    "points_per_dim": 64,
    "potential": {"sigma": 0.5, "lambda": {"family": "constant", "c": 1.0}, "r0": 0.0, "mode": "exact_power"},
    "initial": {"c0": 1.0, "delta": 0.0, "alpha": 0.0, "d_pow": 0.0},
    "unknown_knob": 3
  },
  "solver": {"time_grid": [1.0]},
  "outputs": {"directory": "x"}
}"#,
    );
    let out = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 64);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown_knob") || err.contains("unknown field"), "{err}");
    assert!(err.contains("bad.json:"), "no line anchor: {err}");
}

fn classify_config(dir: &Path, potential: &str, initial: &str, name: &str) -> PathBuf {
    let cfg = format!(
        r#"{{
  "problem": {{
    "n": 1,
    "half_width": 20.0,
    "points_per_dim": 128,
    "potential": {potential},
    "initial": {initial}
  }},
  "solver": {{"time_grid": [1.0]}},
  "outputs": {{"directory": "{}"}}
}}"#,
        dir.join(name).display()
    );
    let path = dir.join(format!("{name}.json"));
    write(&path, &cfg);
    path
}

#[test]
fn classify_exit_codes_encode_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    // exp-sublinear decay: the critical-exponent threshold stays at 1
    let decaying = r#"{"c0": 1.0, "delta": -0.5, "alpha": 0.5, "d_pow": 0.0}"#;

    // subcritical: exists -> 0
    let c0 = classify_config(tmp.path(), HALF_POTENTIAL, decaying, "exists");
    assert_eq!(code(&run(&["classify", "--config", c0.to_str().unwrap()])), 0);

    // critical with accumulated potential 1.5 -> no global solution -> 10
    let crit = r#"{"sigma": 1.0, "lambda": {"family": "exp_decay", "c": 1.5}, "r0": 0.0, "mode": "exact_power"}"#;
    let c1 = classify_config(tmp.path(), crit, decaying, "noglobal");
    assert_eq!(code(&run(&["classify", "--config", c1.to_str().unwrap()])), 10);

    // supercritical -> instantaneous blow-up -> 11
    let sup = r#"{"sigma": 2.0, "lambda": {"family": "constant", "c": 1.0}, "r0": 1.0, "mode": "lower_bounded"}"#;
    let c2 = classify_config(tmp.path(), sup, decaying, "instant");
    assert_eq!(code(&run(&["classify", "--config", c2.to_str().unwrap()])), 11);

    // rapid-growth datum -> complete blow-up -> 12
    let rapid = r#"{"c0": 1.0, "delta": 0.5, "alpha": 2.0, "d_pow": 0.0}"#;
    let c3 = classify_config(tmp.path(), HALF_POTENTIAL, rapid, "complete");
    assert_eq!(code(&run(&["classify", "--config", c3.to_str().unwrap()])), 12);

    // critical below threshold -> undetermined -> 20
    let mild = r#"{"sigma": 1.0, "lambda": {"family": "exp_decay", "c": 0.5}, "r0": 0.0, "mode": "exact_power"}"#;
    let c4 = classify_config(tmp.path(), mild, decaying, "undet");
    assert_eq!(code(&run(&["classify", "--config", c4.to_str().unwrap()])), 20);
}

fn scan_config(dir: &Path, sigma: &str, lambda0: &str, family: &str, name: &str) -> PathBuf {
    let cfg = format!(
        r#"{{
  "sigma": {sigma},
  "lambda0": {lambda0},
  "lambda_family": "{family}",
  "initial": {{"c0": 1.0, "delta": 0.0, "alpha": 0.0, "d_pow": 0.0}},
  "outputs": {{"directory": "{}"}}
}}"#,
        dir.join(name).display()
    );
    let path = dir.join(format!("{name}.json"));
    write(&path, &cfg);
    path
}

#[test]
fn scan_shows_verdict_boundary_at_critical_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scan_config(
        tmp.path(),
        r#"{"min": 0.0, "max": 2.0, "steps": 9}"#,
        r#"{"min": 1.0, "max": 1.0, "steps": 1}"#,
        "constant",
        "sweep",
    );
    assert_eq!(code(&run(&["scan", "--config", cfg.to_str().unwrap(), "--jobs", "2"])), 0);
    let csv = std::fs::read_to_string(tmp.path().join("sweep/phase_scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "sigma,Lambda0,alpha,delta,verdict");
    assert_eq!(rows.len(), 10);
    // sigma < 1: exists; sigma = 1 with constant Lambda: no global
    // (accumulated potential is unbounded); sigma > 1: instantaneous
    let verdicts: Vec<&str> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    assert_eq!(&verdicts[..4], &["global_exists"; 4]);
    assert_eq!(verdicts[4], "no_global_solution");
    assert_eq!(&verdicts[5..], &["instantaneous_blowup"; 4]);
}

#[test]
fn scan_critical_row_flips_at_unit_coefficient() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scan_config(
        tmp.path(),
        r#"{"min": 1.0, "max": 1.0, "steps": 1}"#,
        r#"{"min": 0.5, "max": 1.5, "steps": 3}"#,
        "exp_decay",
        "flip",
    );
    assert_eq!(code(&run(&["scan", "--config", cfg.to_str().unwrap()])), 0);
    let csv = std::fs::read_to_string(tmp.path().join("flip/phase_scan.csv")).unwrap();
    let verdicts: Vec<&str> = csv.lines().skip(1).map(|r| r.rsplit(',').next().unwrap()).collect();
    assert_eq!(verdicts, vec!["undetermined", "undetermined", "no_global_solution"]);
}

#[test]
fn scan_empty_range_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scan_config(
        tmp.path(),
        r#"{"min": 0.0, "max": 1.0, "steps": 0}"#,
        r#"{"min": 1.0, "max": 1.0, "steps": 1}"#,
        "constant",
        "empty",
    );
    assert_eq!(code(&run(&["scan", "--config", cfg.to_str().unwrap()])), 0);
    let csv = std::fs::read_to_string(tmp.path().join("empty/phase_scan.csv")).unwrap();
    assert_eq!(csv.trim(), "sigma,Lambda0,alpha,delta,verdict");
}

#[test]
fn scan_over_budget_exits_65() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scan_config(
        tmp.path(),
        r#"{"min": 0.0, "max": 1.0, "steps": 200}"#,
        r#"{"min": 0.0, "max": 1.0, "steps": 200}"#,
        "constant",
        "budget",
    );
    assert_eq!(code(&run(&["scan", "--config", cfg.to_str().unwrap()])), 65);
}

#[test]
fn verify_kernel_suite_passes_and_unknown_suite_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "kernel", "--seed", "7", "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("verify_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
    assert!(report["checks"].as_array().unwrap().len() >= 7);

    let bad = run(&["verify", "frobnicate"]);
    assert_eq!(code(&bad), 64);
}

#[test]
fn verify_comparison_suite_is_all_green() {
    let out = run(&["verify", "comparison", "--seed", "7"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS comparison-time-independent"), "{text}");
    assert!(text.contains("PASS comparison-time-dependent"), "{text}");
    assert!(text.contains("20 instances"));
}

#[test]
fn two_dimensional_solve_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{
  "problem": {{
    "n": 2,
    "half_width": 8.0,
    "points_per_dim": 32,
    "potential": {{"sigma": 0.5, "lambda": {{"family": "constant", "c": 0.5}}, "r0": 0.0, "mode": "exact_power"}},
    "initial": {{"c0": 1.0, "delta": -1.0, "alpha": 2.0, "d_pow": 0.0}}
  }},
  "solver": {{"time_grid": [0.5]}},
  "outputs": {{"directory": "{}"}}
}}"#,
        tmp.path().join("out2d").display()
    );
    let path = tmp.path().join("cfg2d.json");
    write(&path, &cfg);
    let out = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // CSV rows carry two coordinates in 2D
    let csv = std::fs::read_to_string(tmp.path().join("out2d/snapshot_000.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,value"));
    assert_eq!(csv.lines().count(), 1 + 32 * 32);
}

#[test]
fn verify_operators_exports_envelope_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "operators", "--seed", "3", "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let dump: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("envelope_dump.json")).unwrap())
            .unwrap();
    for key in ["sigma", "rho", "l", "theta0", "rho_star_bound", "h", "c0", "m_inf_stop_index"] {
        assert!(dump.get(key).is_some(), "missing {key}");
    }
    assert!(dump["m_inf_stop_index"].as_u64().unwrap() > 0);
}

#[test]
fn kernel_table_has_twelve_significant_digits() {
    let out = run(&["kernel-table", "--n", "1", "--points", "4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "r,B,gradB,lower,upper");
    let first = lines.next().unwrap();
    let b: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!((b - 0.5 * (-1e-3f64).exp()).abs() < 1e-12);
    // 11 digits after the mantissa point = 12 significant digits
    let field = first.split(',').nth(1).unwrap();
    let mantissa = field.split('e').next().unwrap();
    assert_eq!(mantissa.split('.').nth(1).unwrap().len(), 11, "{field}");
}
