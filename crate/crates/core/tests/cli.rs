use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn phs(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_phs")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn certify_transport_file() {
    let path = models().join("transport.json");
    let (code, out, _) = phs(&["certify", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["generation_certificate"]["verdict"], "contraction");
    assert_eq!(v["classification"]["class"], "certified-exponential");
    assert_eq!(v["kappa_table"][0]["kappa"]["value"], 0.5);
}

#[test]
fn certify_rejects_non_dissipative_boundary() {
    let path = models().join("transport-bad.json");
    let (code, out, _) = phs(&["certify", path.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert_eq!(json(&out)["generation_certificate"]["verdict"], "not-contraction");
}

#[test]
fn missing_file_is_an_input_error() {
    let (code, out, err) = phs(&["certify", "/nonexistent/model.json"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("model.json"));
}

#[test]
fn unknown_preset_parameter_is_an_input_error() {
    let (code, _, err) = phs(&["certify", "preset:schrodinger:kk=2"]);
    assert_eq!(code, 2);
    assert!(err.contains("kk"));
}

#[test]
fn kappa_for_schrodinger_preset() {
    let (code, out, _) = phs(&["kappa", "preset:schrodinger:k=2", "--traces", "0:0,0:1"]);
    assert_eq!(code, 0);
    let k = json(&out)["kappa"]["kappa"]["value"].as_f64().unwrap();
    assert!((k - 0.4).abs() < 1e-12);
}

#[test]
fn spectrum_csv_output() {
    let (code, out, _) = phs(&["--format", "csv", "spectrum", "preset:transport", "--grid-n", "4"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("re,im"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn spectrum_report_carries_surrogate_warning() {
    let (code, out, _) = phs(&["spectrum", "preset:wave", "--grid-n", "8"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["warnings"][0].as_str().unwrap().starts_with("surrogate"));
    assert!(v["spectrum"]["spectral_abscissa"]["value"].as_f64().unwrap() < 0.0);
}

#[test]
fn oracle_reports_the_limit_and_the_scaled_value() {
    let (code, out, _) = phs(&["oracle", "schrodinger", "--k", "1", "--alpha", "2", "--beta", "100"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v.to_string().contains("limit"));
}

#[test]
fn hybrid_tipmass_file() {
    let path = models().join("tipmass.json");
    let (code, out, _) = phs(&["hybrid", path.to_str().unwrap(), "--grid-n", "16", "--t-final", "1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("certified-exponential"));
}

#[test]
fn out_directory_receives_artifacts() {
    let dir = std::env::temp_dir().join(format!("phs-cli-{}", std::process::id()));
    let (code, _, _) = phs(&["--out", dir.to_str().unwrap(), "simulate", "preset:transport", "--grid-n", "8", "--t-final", "0.5"]);
    assert_eq!(code, 0);
    let rep = json(&std::fs::read_to_string(dir.join("report.json")).unwrap());
    assert_eq!(rep["command"], "simulate");
    let energy = std::fs::read_to_string(dir.join("energy.csv")).unwrap();
    assert!(energy.starts_with("t,E\n0,"));
    std::fs::remove_dir_all(&dir).unwrap();
}
