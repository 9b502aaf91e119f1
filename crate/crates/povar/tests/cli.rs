//! End-to-end tests of the `povar` binary: artifact shapes, determinism,
//! and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_povar"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("povar-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const REFERENCE_TOML: &str = r#"
[market]
r = 0.03
sigma = 0.25
T = 10.0
x0 = 100.0

[prior]
values = [0.15, 0.25, 0.35]
probs = [0.3333333333333333, 0.3333333333333333, 0.3333333333333333]

[utility]
kind = "power"
gamma = 3.0

[constraint]
kind = "var"
L = 120.0
beta = 0.05
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn solve_writes_a_deterministic_solution_artifact() {
    let dir_a = temp_dir("solve-a");
    let dir_b = temp_dir("solve-b");
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .args(["--out"])
            .arg(dir)
            .arg("solve")
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("regime=Constrained"), "stdout: {text}");
        assert!(text.contains("lambda1="));
        assert!(text.contains("constraint_prob[0]="));
    }
    let a = std::fs::read(dir_a.join("solution.json")).unwrap();
    let b = std::fs::read(dir_b.join("solution.json")).unwrap();
    assert_eq!(a, b, "solution.json must be byte-identical across reruns");

    let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(json["regime"], "constrained");
    assert!(json["lambda1"].as_f64().unwrap() > 0.0);
    assert!(json["xi_lower"].as_f64().unwrap() > 1.0);
    assert!(json["xi_upper"].as_f64().unwrap() > json["xi_lower"].as_f64().unwrap());
    assert!(json["budget_residual"].as_f64().unwrap().abs() <= 1e-4);
    let probs = json["constraint_prob"].as_array().unwrap();
    assert_eq!(probs.len(), 1);
    assert!((probs[0].as_f64().unwrap() - 0.95).abs() < 1e-6);
}

#[test]
fn emit_config_round_trips_through_a_file() {
    let dir = temp_dir("emit");
    let out = bin()
        .args(["--out"])
        .arg(&dir)
        .args(["solve", "--emit-config"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let emitted = stdout(&out);
    assert!(emitted.contains("[market]"), "emitted: {emitted}");

    let path = write_config(&dir, &emitted);
    let out2 = bin()
        .args(["--config"])
        .arg(&path)
        .args(["--out"])
        .arg(&dir)
        .args(["solve", "--emit-config"])
        .output()
        .unwrap();
    assert!(out2.status.success(), "stderr: {}", stderr(&out2));
    assert_eq!(
        emitted,
        stdout(&out2),
        "emitted config must be a fixed point"
    );
}

#[test]
fn curve_artifact_has_the_documented_shape() {
    let dir = temp_dir("curve");
    let out = bin()
        .args(["--out"])
        .arg(&dir)
        .args(["--grid", "0.5:2.5:11", "curve"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let csv = std::fs::read_to_string(dir.join("curve.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "xi,x_star,x_merton");
    assert_eq!(lines.len(), 12, "header plus 11 grid rows");

    let mut rows = Vec::new();
    for line in &lines[1..] {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        rows.push((cols[0], cols[1], cols[2]));
    }
    // x*(xi) is non-increasing: a decreasing branch, the floor plateau, a
    // downward jump, then decreasing again.
    for pair in rows.windows(2) {
        assert!(
            pair[1].1 <= pair[0].1 + 1e-9,
            "x_star not monotone: {pair:?}"
        );
        assert!(pair[1].2 < pair[0].2, "x_merton not decreasing: {pair:?}");
    }
    // The floor plateau covers [xi_lower, xi_upper) = [1.24, 1.96): the grid
    // points 1.3 .. 1.9 must sit exactly at the floor.
    for (xi, x_star, _) in &rows {
        if (1.3..=1.9).contains(xi) {
            assert_eq!(*x_star, 120.0, "expected the floor at xi = {xi}");
        }
    }
}

#[test]
fn strategy_artifact_has_the_documented_shape() {
    let dir = temp_dir("strategy");
    let out = bin()
        .args(["--out"])
        .arg(&dir)
        .args(["strategy", "--t-grid", "0:8:3", "--y-grid", "-1:1:3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let csv = std::fs::read_to_string(dir.join("strategy.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,y,wealth,pi,pi_fraction");
    assert_eq!(lines.len(), 10, "header plus 3 x 3 grid rows");

    for line in &lines[1..] {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 5);
        assert!(cols.iter().all(|v| v.is_finite()), "non-finite row: {line}");
        assert!(cols[2] > 0.0, "wealth must be positive: {line}");
        assert!(
            (cols[4] - cols[3] / cols[2]).abs() < 1e-12,
            "fraction mismatch: {line}"
        );
    }
    // First row is (t, y) = (0, -1); the (0, 0) row carries the initial
    // wealth by the budget identity.
    let origin: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!((origin[0], origin[1]), (0.0, 0.0));
    assert!((origin[2] - 100.0).abs() < 1e-4, "h(0,0) = {}", origin[2]);
}

#[test]
fn strategy_grid_past_the_horizon_is_a_domain_error() {
    let dir = temp_dir("strategy-domain");
    let out = bin()
        .args(["--out"])
        .arg(&dir)
        .args(["strategy", "--t-grid", "0:10:3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("domain"), "stderr: {}", stderr(&out));
}

#[test]
fn config_problems_exit_with_code_two() {
    let dir = temp_dir("config-errors");

    // Unknown key in a section.
    let bad = REFERENCE_TOML.replace("[utility]", "typo = 1\n\n[utility]");
    let path = write_config(&dir, &bad);
    let out = bin()
        .args(["--config"])
        .arg(&path)
        .args(["--out"])
        .arg(&dir)
        .arg("solve")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));

    // Missing file.
    let out = bin()
        .args(["--config", "/nonexistent/run.toml", "solve"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Malformed grid override fails before any computation.
    let out = bin().args(["--grid", "1:2", "curve"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));

    // Zero paths.
    let out = bin().args(["--paths", "0", "validate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn infeasible_floor_exits_with_code_three() {
    let dir = temp_dir("infeasible");
    let path = write_config(&dir, &REFERENCE_TOML.replace("x0 = 100.0", "x0 = 60.0"));
    let out = bin()
        .args(["--config"])
        .arg(&path)
        .args(["--out"])
        .arg(&dir)
        .arg("solve")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("infeasible"));
}

#[test]
fn validate_writes_a_passing_report_and_path_dump() {
    let dir = temp_dir("validate-pass");
    // Replication is disabled here: its halving-factor band cannot be met by
    // the constrained scenario (see the validate_reports test below), and
    // this test pins the passing path of the exit-code contract.
    let config = format!(
        "{REFERENCE_TOML}\n[output]\nseed = 7\npaths = 20000\nreplication_paths = 0\nfsd_pairs = 2\n"
    );
    let path = write_config(&dir, &config);
    let out = bin()
        .args(["--config"])
        .arg(&path)
        .args(["--out"])
        .arg(&dir)
        .args(["validate", "--dump-paths"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("validation: PASS"), "stdout: {text}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("validation.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["regime"], "constrained");
    assert!(report["replication"].is_null());
    assert_eq!(report["fsd"]["violations"], 0);

    let paths_csv = std::fs::read_to_string(dir.join("paths.csv")).unwrap();
    let lines: Vec<&str> = paths_csv.lines().collect();
    assert_eq!(lines[0], "path,theta,y_t,xi_t,x_t");
    assert_eq!(lines.len(), 10_000 + 1);
    // Terminal wealths respect the floor on at least ~95% of paths.
    let above = lines[1..]
        .iter()
        .filter(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap() >= 120.0)
        .count();
    assert!(
        above as f64 >= 0.93 * 10_000.0,
        "only {above} paths at or above the floor"
    );
}

#[test]
fn validate_reports_replication_band_failure_with_exit_one() {
    let dir = temp_dir("validate-fail");
    // With replication enabled, the halving-factor band [0.4, 0.7] is not
    // attainable for the constrained payoff: the jump at xi_upper puts the
    // strong rate near dt^(1/4) (factor ~0.8). The report must say FAIL and
    // the process must exit 1 (validation failure, not an execution error).
    let config = format!(
        "{REFERENCE_TOML}\n[output]\nseed = 7\npaths = 20000\nreplication_paths = 1000\nsteps = [250, 500]\nfsd_pairs = 0\n"
    );
    let path = write_config(&dir, &config);
    let out = bin()
        .args(["--config"])
        .arg(&path)
        .args(["--out"])
        .arg(&dir)
        .arg("validate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("replication halving factors"),
        "stdout: {text}"
    );
    assert!(text.contains("validation: FAIL"), "stdout: {text}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("validation.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], false);
    assert_eq!(report["replication"]["pass"], false);
    let factors = report["replication"]["halving_factors"].as_array().unwrap();
    assert_eq!(factors.len(), 1);
    let f = factors[0].as_f64().unwrap();
    assert!(
        f > 0.7 && f < 1.0,
        "halving factor {f} should sit above the band"
    );
    // The constraint and budget checks themselves still pass.
    for check in report["constraint"].as_array().unwrap() {
        assert_eq!(check["pass"], true);
    }
    assert_eq!(report["budget"]["pass"], true);
}
