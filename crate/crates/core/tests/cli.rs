use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tsl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run tsl")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn example4_on_integers() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsl(&["example4", "--scale", "integers:0..2", "--alpha", "0", "--beta", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("report.json"));
    assert!((r["value"].as_f64().unwrap() - 6.0).abs() < 1e-12);
    assert_eq!(r["shift"]["c"], 1.0);
    assert_eq!(r["lemma"]["verdict"], "pass");
    assert_eq!(r["oracle"]["method"], "quadratic");
    assert_eq!(r["pass"], true);

    let csv = fs::read_to_string(dir.path().join("minimizer.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["t", "x", "xdelta", "xsigma"]);
    for row in &rows[1..] {
        let t: f64 = row[0].parse().unwrap();
        let x: f64 = row[1].parse().unwrap();
        assert!((x - t).abs() < 1e-12);
    }
    assert_eq!(rows.len(), 4);
}

#[test]
fn example4_on_interval_and_constant_case() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsl(&["example4", "--scale", "interval:0..1", "--alpha", "0", "--beta", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(&dir.path().join("report.json"));
    assert!((r["shift"]["c"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert!(r["shift"]["d"].as_f64().unwrap().abs() < 1e-15);

    let o = tsl(&["example4", "--alpha", "1", "--beta", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(&dir.path().join("report.json"));
    assert_eq!(r["shift"]["c"], 0.0);
    assert_eq!(r["shift"]["d"], 1.0);
}

#[test]
fn example4_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["example4", "--scale", "integers:0..2", "--a", "2", "--b", "0"][..],
        &["example4", "--scale", "bogus"][..],
        &["example4", "--scale", "integers:0..2", "--a", "0.5"][..],
        &["example4", "--trials", "many"][..],
    ] {
        assert_eq!(tsl(args, dir.path()).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn control_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsl(&["control", "--scale", "hstep:0..1:0.1", "--trials", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&dir.path().join("control_report.json"));
    assert_eq!(r["s_star"], -1.0);
    assert!((r["cost"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["invariance"]["pass"], true);
    let csv = fs::read_to_string(dir.path().join("control.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,u1,u2,x1,x2"));
    assert_eq!(lines.count(), 11);

    let o = tsl(&["control", "--scale", "interval:0..1", "--trials", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(&dir.path().join("control_report.json"));
    assert!((r["cost"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn control_rejects_scale_beyond_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsl(&["control", "--scale", "integers:0..2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("control_report.json").exists());
}

#[test]
fn verify_bundle_and_fault() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsl(&["verify", "--trials", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = tsl(&["verify", "--trials", "10", "--fault", "drop-gauge-term"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_json_carries_lemma_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsl(&["verify", "--trials", "5", "--json", "--scale", "integers:0..4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    let lemma = &v["scales"][0]["lemma"];
    for key in [
        "max_abs_residual",
        "points_checked",
        "functional_gap",
        "gap_constant_spread",
        "boundary_gap",
        "trials",
        "verdict",
        "tolerances",
    ] {
        assert!(lemma.get(key).is_some(), "missing {key}");
    }
    assert_eq!(lemma["trials"], 5);
}

#[test]
fn default_output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tsl"))
        .args(["example4", "--trials", "3"])
        .env("TSL_DEFAULT_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("minimizer.csv").exists());
}

#[test]
fn runs_are_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["example4", "--scale", "hstep:0..2:0.25", "--seed", "9", "--trials", "20"];
    tsl(&args, d1.path());
    tsl(&args, d2.path());
    let (mut r1, mut r2) = (report(&d1.path().join("report.json")), report(&d2.path().join("report.json")));
    r1["config"]["out"] = Value::Null;
    r2["config"]["out"] = Value::Null;
    assert_eq!(r1, r2);
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tsl")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_tsl")).arg("nonsense").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = tsl(&["verify", "--fault", "something-else"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scale_from_file_and_inline_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.json");
    fs::write(&path, r#"{"components":[{"point":0.0},{"interval":[1.0,2.0]}]}"#).unwrap();
    let spec = format!("file:{}", path.display());
    let o = tsl(&["example4", "--scale", &spec, "--trials", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let inline = r#"{"generator":{"qscale":{"q":2.0,"k_min":0,"k_max":6}}}"#;
    let o = tsl(&["example4", "--scale", inline, "--trials", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(&dir.path().join("report.json"));
    assert_eq!(r["config"]["scale"]["generator"]["qscale"]["q"], 2.0);
}
