use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn squatcalc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_squatcalc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_matrix(dir: &Path, name: &str, json: &str) {
    std::fs::write(dir.join(name), json).unwrap();
}

const UPPER: &str = r#"{"n":2,"entries":[[[2,0,0,0],[0,1,0,0]],[[0,0,0,0],[3,0,0,0]]]}"#;

#[test]
fn spectrum_lists_spheres() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix(dir.path(), "m.json", r#"{"n":2,"entries":[[[1,0,0,0],[0,0,0,0]],[[0,0,0,0],[0,0,0,2]]]}"#);
    let o = squatcalc(&["spectrum", "--matrix", "m.json"], dir.path());
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let spheres = v.as_array().unwrap();
    assert_eq!(spheres.len(), 2);
    let mut got: Vec<(f64, f64)> = spheres
        .iter()
        .map(|s| (s["u"].as_f64().unwrap(), s["v"].as_f64().unwrap()))
        .collect();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // 2e3 sits on the sphere 0 + 2S
    assert!((got[0].0).abs() < 1e-14 && (got[0].1 - 2.0).abs() < 1e-14);
    assert!((got[1].0 - 1.0).abs() < 1e-14 && got[1].1.abs() < 1e-14);

    let csv = squatcalc(&["spectrum", "--matrix", "m.json", "--format", "csv"], dir.path());
    assert!(stdout(&csv).starts_with("u,v,mult\n"));
}

#[test]
fn funcalc_square_root_of_triangular_matrix() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix(dir.path(), "m.json", UPPER);
    let o = squatcalc(
        &["funcalc", "--matrix", "m.json", "--expr", "pow(s,0.5)", "--out", "r.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let e = &v["operator"]["entries"];
    let at = |i: usize, j: usize, c: usize| e[i][j][c].as_f64().unwrap();
    // sqrt of [[a, b],[0, c]] has off-diagonal b/(sqrt a + sqrt c)
    assert!((at(0, 0, 0) - 2f64.sqrt()).abs() < 1e-10);
    assert!((at(1, 1, 0) - 3f64.sqrt()).abs() < 1e-10);
    assert!((at(0, 1, 1) - 1.0 / (2f64.sqrt() + 3f64.sqrt())).abs() < 1e-10);
    assert!(v["est_quadrature_error"].as_f64().is_some());
    assert!(v["contour_used"]["arcs"].as_array().is_some());

    let circle = squatcalc(
        &["funcalc", "--matrix", "m.json", "--expr", "s*s", "--circle", "2.5,0,2", "--nodes", "64"],
        dir.path(),
    );
    assert!(circle.status.success(), "{}", String::from_utf8_lossy(&circle.stderr));
    let v: Value = serde_json::from_str(&stdout(&circle)).unwrap();
    assert!((v["operator"]["entries"][0][1][1].as_f64().unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn fracpow_check_reports_cross_deltas() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix(dir.path(), "m.json", UPPER);
    let o = squatcalc(
        &["fracpow", "--matrix", "m.json", "--alpha", "0.4", "--method", "komatsu", "--check"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let deltas = v["cross_method_deltas"].as_array().unwrap();
    assert_eq!(deltas.len(), 2);
    for d in deltas {
        assert!(d["rel_delta"].as_f64().unwrap() < 1e-6);
    }
    assert!((v["operator"]["entries"][0][0][0].as_f64().unwrap() - 2f64.powf(0.4)).abs() < 1e-8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_matrix(dir.path(), "neg.json", r#"{"n":1,"entries":[[[-1,0,0,0]]]}"#);
    write_matrix(dir.path(), "bad.json", r#"{"n":2,"entries":[]}"#);
    let domain = squatcalc(&["fracpow", "--matrix", "neg.json", "--alpha", "0.5"], dir.path());
    assert_eq!(domain.status.code(), Some(1));
    assert!(domain.stdout.is_empty());

    let missing = squatcalc(&["spectrum", "--matrix", "absent.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let malformed = squatcalc(&["spectrum", "--matrix", "bad.json"], dir.path());
    assert_eq!(malformed.status.code(), Some(2));

    let unknown = squatcalc(&["spectrum", "--matrix", "neg.json", "--frobnicate"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));

    let bad_expr = squatcalc(&["funcalc", "--matrix", "neg.json", "--expr", "s+"], dir.path());
    assert_eq!(bad_expr.status.code(), Some(2));

    let bad_alpha = squatcalc(
        &["heat", "--alpha", "1.5", "--grid", "4", "--dt", "0.1", "--steps", "1"],
        dir.path(),
    );
    assert_eq!(bad_alpha.status.code(), Some(1));

    let help = squatcalc(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn field_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(squatcalc(&["field", "gen", "--grid", "8", "--init", "modes:1,0,0:1", "--out", "u.sqf"], p)
        .status
        .success());
    assert!(squatcalc(&["field", "apply", "--op", "frac-laplacian", "--alpha", "0.5", "--in", "u.sqf", "--out", "v.sqf"], p)
        .status
        .success());
    let o = squatcalc(&["field", "norm", "--in", "v.sqf"], p);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // cos(x) is fixed by (-Δ)^{1/2}
    assert!((v["real_max"].as_f64().unwrap() - 1.0).abs() < 1e-13);
    assert!(v["max_imag"].as_f64().unwrap() < 1e-13);

    let no_alpha = squatcalc(&["field", "apply", "--op", "frac-nabla", "--in", "u.sqf", "--out", "w.sqf"], p);
    assert_eq!(no_alpha.status.code(), Some(2));
}

#[test]
fn heat_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = |out: &'static str| {
        vec![
            "heat", "--alpha", "0.75", "--grid", "8", "--dt", "0.01", "--steps", "6", "--form", "both",
            "--scheme", "euler", "--snap-every", "3", "--out", out,
        ]
    };
    assert!(squatcalc(&args("a"), p).status.success());
    let threaded = Command::new(env!("CARGO_BIN_EXE_squatcalc"))
        .args(args("b"))
        .current_dir(p)
        .env("SQUATCALC_THREADS", "1")
        .output()
        .unwrap();
    assert!(threaded.status.success());
    for name in ["norms.csv", "snap_000000.sqf", "snap_000003.sqf", "snap_000006.sqf"] {
        let a = std::fs::read(p.join("a").join(name)).unwrap();
        let b = std::fs::read(p.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let csv = std::fs::read_to_string(p.join("a/norms.csv")).unwrap();
    assert!(csv.starts_with("step,t,l2,min,max,form_delta\n"));
    assert_eq!(csv.lines().count(), 8);

    let bad_threads = Command::new(env!("CARGO_BIN_EXE_squatcalc"))
        .args(["selftest", "--only", "2"])
        .env("SQUATCALC_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}

#[test]
fn selftest_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = squatcalc(&["selftest", "--only", "2,8"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert!(text.contains("2/2 criteria passed"));
    let missing = squatcalc(&["selftest", "--only", "42"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}
