use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn liegate(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liegate"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn error_json(o: &Output) -> Value {
    let v: Value = serde_json::from_slice(&o.stderr).expect("stderr is JSON");
    v["error"].clone()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn params_writes_contracted_columns() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "sho.json", r#"{"t_end": 2.0, "samples": 11}"#);
    let o = liegate(&["params", "--system", "gho", "--path", "path1", "--config", &cfg, "--out", "o"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("o/params.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,S,lam,Pi,gamma,alpha,phi,beta,u,udot");
    assert_eq!(lines.count(), 11);
    let s = read_json(&d.path().join("o/summary.json"));
    assert!((num(&s["valid_to"]) - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    assert!(s["final"]["alpha"].is_null());
    assert!((num(&s["final"]["u"]) - 2f64.cos()).abs() < 1e-8);
    assert_eq!(num(&s["delta"]), 1.0);
    let maps = fs::read_to_string(d.path().join("o/maps.csv")).unwrap();
    assert!(maps.starts_with("t,M00,M01,M10,M11,shift0,shift1,det_res,form_res"));
}

#[test]
fn numbers_carry_seventeen_digits() {
    let d = tempfile::tempdir().unwrap();
    let o = liegate(&["params", "--system", "iontrap", "--t-end", "0.5", "--out", "."], d.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(d.path().join("params.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(7).unwrap().split(',').collect();
    for field in row {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
    let s = read_json(&d.path().join("summary.json"));
    assert!(s["closed_form"]["alpha"].is_number());
    let closed = num(&s["closed_form"]["beta"]);
    assert!((closed - num(&s["final"]["beta"])).abs() < 1e-7);
}

#[test]
fn negative_t_end_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.json", r#"{"t_end": -1.0}"#);
    let o = liegate(&["params", "--system", "gho", "--config", &cfg, "--out", "o"], d.path());
    assert_eq!(code(&o), 2);
    assert_eq!(error_json(&o)["field"], "t_end");
    assert!(!d.path().join("o/params.csv").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    for (text, field) in [
        (r#"{"t_end": 1.0, "t_final": 2.0}"#, "t_final"),
        (r#"{"kanai": {"tau": 1.0, "gamma": 0.1}}"#, "gamma"),
        (r#"{"coeffs": {"a": {"kind": "constant", "value": 1.0, "slope": 2.0}}}"#, "slope"),
        (r#"{"suite": {"n_random": 2, "fast": true}}"#, "fast"),
    ] {
        let cfg = write(d.path(), "c.json", text);
        let o = liegate(&["params", "--system", "gho", "--config", &cfg, "--out", "o"], d.path());
        assert_eq!(code(&o), 2, "{text}");
        assert_eq!(error_json(&o)["field"], field);
    }
}

#[test]
fn critical_damping_is_a_domain_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "k.json", r#"{"kanai": {"tau": 1.0, "omega0": 0.5}}"#);
    let o = liegate(&["params", "--system", "kanai", "--config", &cfg, "--out", "o"], d.path());
    assert_eq!(code(&o), 3);
    assert!(error_json(&o)["message"].as_str().unwrap().contains("critical damping excluded"));
}

#[test]
fn kernel_matches_mehler() {
    let d = tempfile::tempdir().unwrap();
    let t = FRAC_PI_4.to_string();
    let o = liegate(&["kernel", "--system", "gho", "--t-end", &t, "--tol", "1e-12", "--out", "."], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let k = read_json(&d.path().join("kernel.json"));
    let (s, c) = (FRAC_PI_4.sin(), FRAC_PI_4.cos());
    assert!((num(&k["Q"][0]["re"]) - c / (2.0 * s)).abs() < 1e-9);
    assert!((num(&k["Q_prime"][0]["re"]) - c / (2.0 * s)).abs() < 1e-9);
    assert!((num(&k["C"][0]["re"]) + 1.0 / s).abs() < 1e-9);
    let pref = (1.0 / (std::f64::consts::TAU * s)).sqrt();
    assert!((num(&k["prefactor"]["re"]) - pref * FRAC_PI_4.cos()).abs() < 1e-9);
    assert!((num(&k["prefactor"]["im"]) + pref * FRAC_PI_4.sin()).abs() < 1e-9);
}

#[test]
fn kernel_beyond_caustic_exits_four() {
    let d = tempfile::tempdir().unwrap();
    let o = liegate(&["kernel", "--system", "gho", "--t-end", "2.0", "--out", "."], d.path());
    assert_eq!(code(&o), 4);
    let e = error_json(&o);
    assert_eq!(e["kind"], "caustic");
    assert!((num(&e["valid_to"]) - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    assert!(!d.path().join("kernel.json").exists());
}

#[test]
fn apply_writes_evolved_grid() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "g.json", r#"{"grid": {"n": 256, "x_min": -16.0, "x_max": 16.0}}"#);
    let o = liegate(
        &["kernel", "--system", "lp", "--t-end", "1.0", "--config", &cfg, "--apply", "gaussian:sigma=1,p0=0.5", "--out", "."],
        d.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("psi_out.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,re,im");
    assert_eq!(csv.lines().count(), 257);
    let k = read_json(&d.path().join("kernel.json"));
    assert!((num(&k["apply"]["norm_out"]) - 1.0).abs() < 1e-6);

    let o = liegate(&["kernel", "--system", "gho", "--t-end", "0.5", "--apply", "psi_out.csv", "--out", "again"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = liegate(&["kernel", "--system", "gho", "--t-end", "0.5", "--apply", "gaussian:width=2", "--out", "."], d.path());
    assert_eq!(code(&o), 2);
    assert_eq!(error_json(&o)["field"], "apply");
}

#[test]
fn two_dimensional_systems() {
    let d = tempfile::tempdir().unwrap();
    let o = liegate(&["params", "--system", "efield", "--path", "path2", "--t-end", "2.0", "--out", "e"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&d.path().join("e/summary.json"));
    let closed = num(&s["closed_form"]["values"]["lam_x"]);
    assert!((closed - num(&s["final"]["lam_x"])).abs() < 1e-6);
    let maps = fs::read_to_string(d.path().join("e/maps.csv")).unwrap();
    assert!(maps.lines().next().unwrap().contains("M33"));

    let cfg = write(
        d.path(),
        "cp.json",
        r#"{"field": {"m": {"kind": "constant", "value": 1.0}, "B": {"kind": "constant", "value": 1.0}}, "grid": {"n": 24, "x_min": -6.0, "x_max": 6.0}}"#,
    );
    let o = liegate(&["kernel", "--system", "cp2d", "--config", &cfg, "--t-end", "0.5", "--apply", "gaussian", "--out", "c"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let k = read_json(&d.path().join("c/kernel.json"));
    assert_eq!(k["dof"], 2);
    assert_eq!(k["C"].as_array().unwrap().len(), 4);
    let o = liegate(&["params", "--system", "cp2d", "--out", "c"], d.path());
    assert_eq!(code(&o), 2);
    assert_eq!(error_json(&o)["field"], "field");
}

#[test]
fn structure_export() {
    let d = tempfile::tempdir().unwrap();
    let o = liegate(&["structure", "--algebra", "lp", "--out", "."], d.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(d.path().join("structure_LP.csv")).unwrap();
    assert_eq!(csv, "i,j,k,num,den\n2,3,1,1,1\n2,4,3,2,1\n");
}

#[test]
fn bad_arguments_and_threads() {
    let d = tempfile::tempdir().unwrap();
    let o = liegate(&["params", "--system", "nope"], d.path());
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_liegate"))
        .args(["structure", "--out", "."])
        .env("LIEGATE_THREADS", "zero")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert_eq!(error_json(&o)["field"], "LIEGATE_THREADS");
}

#[test]
fn structure_constant_checks_reported() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "v.json", r#"{"criteria": [1, 9]}"#);
    let o = liegate(&["verify", "--config", &cfg, "--out", "."], d.path());
    assert_eq!(code(&o), 0);
    let r = read_json(&d.path().join("report.json"));
    assert_eq!(r["passed"], true);
    assert!(r["structure_constant_checks_passed"].as_u64().unwrap() >= 105);
    let cp_pairs = r["criteria"][0]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["label"].as_str().unwrap().starts_with("CP [") && c["passed"] == true)
        .count();
    assert_eq!(cp_pairs, 105);
}

#[test]
fn verify_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "v.json",
        r#"{"criteria": [2, 3, 5, 6], "suite": {"n_random": 4, "n_equivalence": 2}}"#,
    );
    let a = liegate(&["verify", "--seed", "7", "--config", &cfg, "--out", "a"], d.path());
    let b = liegate(&["verify", "--seed", "7", "--config", &cfg, "--out", "b"], d.path());
    assert_eq!((code(&a), code(&b)), (0, 0));
    let ra = fs::read(d.path().join("a/report.json")).unwrap();
    let rb = fs::read(d.path().join("b/report.json")).unwrap();
    assert_eq!(ra, rb);
    let c = liegate(&["verify", "--seed", "8", "--config", &cfg, "--out", "c"], d.path());
    assert_eq!(code(&c), 0);
    assert_ne!(ra, fs::read(d.path().join("c/report.json")).unwrap());
}

#[test]
fn injected_corruption_fails_verification() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "v.json", r#"{"criteria": [2], "suite": {"n_random": 2}}"#);
    let o = liegate(&["verify", "--config", &cfg, "--inject-corruption", "--out", "."], d.path());
    assert_eq!(code(&o), 1);
    assert_eq!(read_json(&d.path().join("report.json"))["passed"], false);
    let o = liegate(&["verify", "--config", &cfg, "--out", "."], d.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn default_suite_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = liegate(&["verify", "--out", "."], d.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.contains(" PASS: ")).count(), 9);
}
