use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn homog(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homog"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("homog runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CONSTANT_STUDY: &str = r#"{
    "dimension": 1,
    "coefficient": {"form": "constant", "value": 1.0},
    "target": {"form": "affine", "z": [1.0]},
    "epsilon_ladder": [0.1, 0.05, 0.025],
    "coupling": {"gamma": 3.0},
    "truncation": {"explicit": 1.0},
    "cell": {"points": 16},
    "output": "out.csv"
}"#;

#[test]
fn constant_study_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "study.json", CONSTANT_STUDY);
    let out = homog(&["gamma-study", "study.json", "--no-timing", "--plot-script"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon,s,r,F_recovery,F_target_hom,ratio,tail_bound,quad_error,wall_time_seconds"
    );
    let mut previous = f64::INFINITY;
    for (line, eps) in lines.zip([0.1f64, 0.05, 0.025]) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let s = 1.0 - eps.powi(3);
        let want = 1.0 / (3.0 - 2.0 * s);
        assert!((cols[5] / want - 1.0).abs() < 1e-6, "{line}");
        assert!((1.0 - cols[5]).abs() < previous);
        previous = (1.0 - cols[5]).abs();
        assert_eq!(cols[8], 0.0);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.csv.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 3);
    assert_eq!(summary["corrector_solves"], 1);
    assert_eq!(summary["config_sha256"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("out.csv.gp").exists());
    assert!(!dir.path().join("out.csv.lock").exists());
}

#[test]
fn empty_ladder_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "study.json", &CONSTANT_STUDY.replace("[0.1, 0.05, 0.025]", "[]"));
    let out = homog(&["gamma-study", "study.json"], dir.path());
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn held_lock_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "study.json", CONSTANT_STUDY);
    std::fs::write(dir.path().join("out.csv.lock"), "1").unwrap();
    let out = homog(&["gamma-study", "study.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(homog(&["cell-solve", "missing.json"], dir.path()).status.code(), Some(2));
    write(dir.path(), "bad.json", r#"{"dimension": 1, "coefficient": {"form": "nope"}}"#);
    assert_eq!(homog(&["cell-solve", "bad.json"], dir.path()).status.code(), Some(2));
    // a grid field with s above 1 - h² is rejected before any work
    write(
        dir.path(),
        "grid.json",
        r#"{"dimension": 1, "coefficient": {"form": "constant", "value": 1.0},
            "field": {"form": "grid", "nodes": [3], "values": [0.0, 1.0, 0.0]},
            "epsilon": 0.1, "s": 0.9}"#,
    );
    assert_eq!(homog(&["energy", "grid.json"], dir.path()).status.code(), Some(2));
    assert_eq!(homog(&["bogus-command"], dir.path()).status.code(), Some(2));
}

#[test]
fn regime_compare_annotates_every_gamma() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "study.json", CONSTANT_STUDY);
    let out = homog(&["regime-compare", "study.json", "--gammas", "1,2,3,4", "--no-timing"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let annotations: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut c = l.split(',');
            (c.next().unwrap().to_string(), c.next().unwrap().to_string())
        })
        .collect();
    assert_eq!(annotations.len(), 12);
    for (g, a) in annotations {
        let want = if g.parse::<f64>().unwrap() > 2.0 { "theorem applies" } else { "regime open" };
        assert_eq!(a, want);
    }
    // constant coefficient: every regime converges
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.csv.json")).unwrap()).unwrap();
    for r in summary["regimes"].as_array().unwrap() {
        assert!((r["final_ratio"].as_f64().unwrap() - 1.0).abs() < 0.05);
    }
}

#[test]
fn energy_prints_value_then_report() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "e.json",
        r#"{"dimension": 1, "coefficient": {"form": "constant", "value": 1.0},
            "field": {"form": "affine", "z": [1.0]}, "epsilon": 0.5, "s": 0.5,
            "truncation": {"explicit": 1.0}}"#,
    );
    let out = homog(&["energy", "e.json", "--report", "r.json", "--export-grid", "g.csv", "--grid-nodes", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((value - 0.5).abs() < 1e-6);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["value"].as_f64().unwrap(), value);
    assert!(report["quad_error_estimate"].as_f64().unwrap() < 1e-6);
    let grid = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(grid.lines().count(), 6);
}

#[test]
fn cell_solve_exports_correctors() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"dimension": 1, "coefficient": {"form": "two_phase", "alpha": 1.0, "beta": 4.0}, "cell": {"points": 64}}"#,
    );
    let out = homog(&["cell-solve", "c.json", "--correctors", "phi.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let a = report["a_hom"][0][0].as_f64().unwrap();
    assert!(a > 1.0 && a < 2.5);
    let phi = std::fs::read_to_string(dir.path().join("phi.csv")).unwrap();
    assert_eq!(phi.lines().next().unwrap(), "direction,node,y0,value");
    assert_eq!(phi.lines().count(), 65);
}

#[test]
fn kuhn_check_passes_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let out = homog(&["kuhn-check", "--d", "2", "--export", "interp.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("all 2 checks passed"));
    let csv = std::fs::read_to_string(dir.path().join("interp.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,value"));
    assert!(csv.lines().count() > 100);
    assert_eq!(homog(&["kuhn-check", "--d", "7"], dir.path()).status.code(), Some(2));
}
