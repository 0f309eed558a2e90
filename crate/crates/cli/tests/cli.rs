use std::path::Path;
use std::process::Command;

use qvalued::io::read_samples;
use qvalued::{best_fit, FitConfig, QField, Region};

fn aqc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aqc"))
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let path = dir.join(name);
    let status = aqc()
        .args(["lab", "generate", "--resolution", "0.03125", "--out"])
        .arg(&path)
        .args(extra)
        .status()
        .unwrap();
    assert!(status.success());
    path
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid JSON output")
}

#[test]
fn lab_generate_header_and_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "s.csv", &["--kind", "branch_power", "--Q", "2", "--p", "3"]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("2,1,2"));
    let grid = qvalued::Domain::unit_ball(2).sample(0.03125).unwrap();
    assert_eq!(lines.count(), grid.len());
}

#[test]
fn generated_samples_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "s.csv", &["--kind", "branch_power", "--components", "both"]);
    let u = read_samples(&path).unwrap();
    let f = qvalued::harmonic::BranchPower::new(2, 2, 3, qvalued::harmonic::Components::Both).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..u.len() {
        let exact = f.value(u.grid().point(i));
        worst = worst.max(qvalued::metric_g(&u.value(i), &exact).unwrap());
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn missing_file_is_an_input_error() {
    let out = aqc().args(["fit", "--in", "/nonexistent/samples.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_header_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "n,m,Q\n0,0,1\n").unwrap();
    let out = aqc().arg("fit").arg("--in").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_of_exact_polynomial_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "lin.csv", &["--kind", "linear_tuple", "--slopes", "1,-2"]);
    let out = aqc().arg("fit").arg("--in").arg(&path).output().unwrap();
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert!(v["residual"].as_f64().unwrap() <= 1e-16);
}

#[test]
fn fit_replays_the_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "z.csv", &[]);
    let out_path = dir.path().join("fit.json");
    let status = aqc()
        .args(["fit", "--k", "1", "--seed", "7", "--radius", "0.75", "--in"])
        .arg(&path)
        .arg("--out")
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let cli = json(&std::fs::read(&out_path).unwrap());

    let u = read_samples(&path).unwrap();
    let cfg = FitConfig {
        seed: 7,
        ..FitConfig::default()
    };
    let fit = best_fit(&u, &Region::new(&[0.0, 0.0], 0.75), 1, 2.0, &cfg).unwrap();
    let lib = serde_json::to_value(fit.poly.to_json()).unwrap();
    assert_eq!(
        serde_json::to_string(&cli["poly"]).unwrap(),
        serde_json::to_string(&lib).unwrap()
    );
}

#[test]
fn exponent_of_three_halves() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "z.csv", &[]);
    let res = dir.path().join("res");
    let status = aqc().arg("exponent").arg("--in").arg(&path).arg("--out").arg(&res).status().unwrap();
    assert!(status.success());
    let v = json(&std::fs::read(res.join("exponent.json")).unwrap());
    let lambda = v["lambda_hat"].as_f64().unwrap();
    let alpha = v["alpha_hat"].as_f64().unwrap();
    assert!((lambda - 5.0).abs() < 0.1, "{lambda}");
    assert!((alpha - 0.5).abs() < 0.05, "{alpha}");
    let csv = std::fs::read_to_string(res.join("exponent.csv")).unwrap();
    assert!(csv.starts_with("center,rho,excess\n"));
    assert!(csv.lines().count() > 4);
}

#[test]
fn certify_golden_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    std::fs::write(&h, r#"{"n": 2, "k": 1, "q_exp": 2.0, "beta1": 1.0, "mu": 0.5}"#).unwrap();
    let out = aqc().arg("certify").arg("--hypothesis").arg(&h).output().unwrap();
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert!((v["lambda_tilde"].as_f64().unwrap() - 25.0 / 6.0).abs() < 1e-15);
    assert_eq!(v["gamma"].as_f64().unwrap(), 1.0 / 4096.0);
    assert!(!v["factors"].as_array().unwrap().is_empty());
}

#[test]
fn certify_refusal_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("broken.csv");
    let grid = qvalued::Domain::unit_ball(2).sample(1.0 / 128.0).unwrap();
    let mut text = String::from("2,1,1\n");
    for p in grid.points() {
        let r2 = p[0] * p[0] + p[1] * p[1];
        text.push_str(&format!("{},{},{}\n", p[0], p[1], r2.powf(0.05)));
    }
    std::fs::write(&samples, text).unwrap();
    let h = dir.path().join("h.json");
    std::fs::write(&h, r#"{"n": 2, "k": 0, "q_exp": 2.0, "beta1": 1.0, "mu": 0.9}"#).unwrap();
    let out = aqc()
        .arg("certify")
        .arg("--hypothesis")
        .arg(&h)
        .arg("--in")
        .arg(&samples)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out.stdout);
    assert_eq!(v["outcome"], "refused");
    assert!(!v["audit"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn certify_rejects_bad_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    std::fs::write(&h, r#"{"n": 2, "k": 1, "q_exp": 2.0, "beta1": 1.0, "mu": 1.5}"#).unwrap();
    let out = aqc().arg("certify").arg("--hypothesis").arg(&h).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lab_audit_reports_branch_point() {
    let out = aqc()
        .args(["lab", "audit", "--kind", "branch_power", "--resolution", "0.03125"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["branch_samples"], 1);
    assert_eq!(v["good_decay"]["good"], true);
}

#[test]
fn seminorm_needs_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "z.csv", &[]);
    let out = aqc().arg("seminorm").arg("--in").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = aqc()
        .args(["seminorm", "--lambda", "5"])
        .arg("--in")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(json(&out.stdout)["value"].as_f64().unwrap() > 0.0);
}
