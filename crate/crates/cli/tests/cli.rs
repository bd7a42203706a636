use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hsl(args: &[&str], dir: &Path, stdin_config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hsl"));
    cmd.args(args).current_dir(dir).env_remove("HSL_THREADS");
    if let Some(text) = stdin_config {
        let path = dir.join("config.json");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn flat_curve_constant_field_is_a_circle() {
    let dir = tempfile::tempdir().unwrap();
    let out = hsl(&["flat-curve", "--out", "fc"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["closed"], Value::Bool(true));
    assert!((s["mean_radius"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(s["gap"].as_f64().unwrap() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("fc/curve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("s,theta,x,y"));
    assert_eq!(csv.lines().count(), s["samples"].as_u64().unwrap() as usize + 1);
    let svg = std::fs::read_to_string(dir.path().join("fc/curve.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    let on_disk: Value = serde_json::from_slice(&std::fs::read(dir.path().join("fc/summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, s);
}

#[test]
fn stability_report_on_unit_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = hsl(&["stability-report", "--quick", "--out", "sr"], dir.path(), Some(r#"{"export_matrix": true}"#));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert!((s["lambda0"].as_f64().unwrap() + 2.0).abs() < 0.05);
    assert_eq!(s["certificate"]["status"], "unstable");
    assert_eq!(s["closed"], Value::Bool(true));
    let n = s["vertices"].as_u64().unwrap() as usize;
    let obj = std::fs::read_to_string(dir.path().join("sr/surface.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), n);
    let csv = std::fs::read_to_string(dir.path().join("sr/fields.csv")).unwrap();
    assert_eq!(csv.lines().count(), n + 1);
    assert!(csv.lines().next().unwrap().contains("eigenfunction"));
    let triplets = std::fs::read_to_string(dir.path().join("sr/operator.txt")).unwrap();
    let header: Vec<usize> = triplets.lines().next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(header[..2], [n, n]);
    assert_eq!(triplets.lines().count(), header[2] + 1);
}

#[test]
fn estrella_of_linear_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = hsl(&["estrella", "--out", "es"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert!((s["c"].as_f64().unwrap() + 1.0).abs() < 1e-4);
    assert!(s["argmin"][2].as_f64().unwrap().abs() < 1e-2, "minimum sits on the equator");
    assert_eq!(s["radius_bound"], Value::Null);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"field": {"kind": "analytic", "formula": {"id": "zonal_poly", "coeffs": [1, 0.2], "axis": [0, 1, 0]}}}"#;
    for run in ["a", "b"] {
        let out = hsl(&["flat-curve", "--out", run], dir.path(), Some(cfg));
        assert_eq!(out.status.code(), Some(0));
        let out = hsl(&["solve-graph", "--quick", "--out", &format!("g{run}")], dir.path(), Some(cfg));
        assert_eq!(out.status.code(), Some(0));
    }
    for (a, b) in [
        ("a/summary.json", "b/summary.json"),
        ("a/curve.csv", "b/curve.csv"),
        ("ga/summary.json", "gb/summary.json"),
        ("ga/graph.csv", "gb/graph.csv"),
        ("ga/graph.obj", "gb/graph.obj"),
    ] {
        let x = std::fs::read(dir.path().join(a)).unwrap();
        let y = std::fs::read(dir.path().join(b)).unwrap();
        assert!(x == y, "{a} and {b} differ");
    }
    // 17 significant digits on every float
    let text = std::fs::read_to_string(dir.path().join("a/summary.json")).unwrap();
    assert!(text.contains("\"theta0\":0.0000000000000000e0"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(hsl(&["no-such-command"], p, None).status.code(), Some(2));
    assert_eq!(hsl(&["estrella", "--resolution", "x"], p, None).status.code(), Some(2));
    for cfg in [
        r#"{"unknown": 1}"#,
        r#"{"sizes": [1.0]}"#,
        r#"{"command": "flux"}"#,
        r#"{"tolerances": {"solver": 1e-9}}"#,
        "not json",
    ] {
        let out = hsl(&["estrella"], p, Some(cfg));
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "usage");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_hsl")).arg("estrella").env("HSL_THREADS", "0").current_dir(p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(hsl(&["--help"], p, None).status.code(), Some(0));
}

#[test]
fn computation_errors_exit_with_one_and_a_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = hsl(&["flux", "--out", "fx"], dir.path(), Some(r#"{"surface": {"kind": "flat_disk", "radius": 1}}"#));
    assert_eq!(out.status.code(), Some(1));
    let rec = summary(&out);
    assert_eq!(rec["error"]["kind"], "not_closed");
    let on_disk: Value = serde_json::from_slice(&std::fs::read(dir.path().join("fx/error.json")).unwrap()).unwrap();
    assert_eq!(on_disk, rec);

    // a Newton failure is reported with its own kind
    let cfg = r#"{"domain": {"shape": "disk", "center": [0, 0], "radius": 2.0, "spacing": 0.125}, "tolerances": {"max_newton": 3}}"#;
    let out = hsl(&["solve-graph", "--out", "ng"], dir.path(), Some(cfg));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(summary(&out)["error"]["kind"], "non_convergence");
}

#[test]
fn resolution_and_threads_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hsl"))
        .args(["rotational", "--resolution", "17", "--out", "r"])
        .env("HSL_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["n_s"], 18);
    assert_eq!(s["diagnostics"]["pole_to_pole"], Value::Bool(true));
    assert!((s["polar_height"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn sweeps_and_flux() {
    let dir = tempfile::tempdir().unwrap();
    let out = hsl(&["height-sweep", "--out", "h", "--resolution", "16"], dir.path(), Some(r#"{"sizes": [0.25, 0.5, 2.0]}"#));
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["rows"][2]["max_height"], Value::Null);
    assert_eq!(s["nonexistence_from"].as_f64(), Some(2.0));
    let csv = std::fs::read_to_string(dir.path().join("h/heights.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let out = hsl(&["radius-sweep", "--quick", "--out", "r"], dir.path(), Some(r#"{"radii": [0.4]}"#));
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["all_pass"], Value::Bool(true));
    assert_eq!(s["rows"].as_array().unwrap().len(), 2);

    let cfg = r#"{"field": {"kind": "analytic", "formula": {"id": "linear", "a": 1, "b": 0, "axis": [0, 0, 1]}},
                  "surface": {"kind": "round_sphere", "radius": 1}, "vectors": [[0, 0, 1]]}"#;
    let out = hsl(&["flux", "--out", "f", "--resolution", "64"], dir.path(), Some(cfg));
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    let flux = s["rows"][0]["flux"].as_f64().unwrap();
    assert!((flux / (4.0 * std::f64::consts::PI / 3.0) - 1.0).abs() < 0.01);
    assert_eq!(s["rows"][0]["cornex"]["obstructed"], Value::Bool(true));
}

#[test]
fn reproduce_subset() {
    let dir = tempfile::tempdir().unwrap();
    let out = hsl(&["reproduce", "--quick", "--out", "rep"], dir.path(), Some(r#"{"criteria": [1, 8]}"#));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.lines().all(|l| l.contains(" PASS ")));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("rep/suite.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], 2);
    assert_eq!(report["options"]["quick"], Value::Bool(true));
    assert!(std::fs::read_to_string(dir.path().join("rep/suite.md")).unwrap().contains("\\|radius - 0.5\\|"));
}
