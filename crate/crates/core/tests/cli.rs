use std::path::Path;
use std::process::{Command, Output};

fn ssblowup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssblowup"))
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[evolve]
grid_points = 512
t_end = 1.0
samples_per_unit_time = 64.0
richardson = false

[runs.tiny]
gates = []

[runs.tiny.data]
kind = "gaussian-lump"
amplitude = 0.05
r0 = 0.0
sigma = 1.0
r_cut = 1.0
width = 0.5
"#;

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn zero_step_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssblowup(dir.path(), &["spectrum", "--step", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[spectrum]\nstepp = 0.1\n").unwrap();
    let o = ssblowup(dir.path(), &["--config", p.to_str().unwrap(), "show-config"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&p, "[spectrum\n").unwrap();
    let o = ssblowup(dir.path(), &["--config", p.to_str().unwrap(), "show-config"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn low_spectrum_has_three_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssblowup(dir.path(), &["spectrum", "--range", "-3", "1.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/spectrum.json")).unwrap()).unwrap();
    let roots: Vec<&serde_json::Value> =
        json["records"].as_array().unwrap().iter().filter(|r| !r["index"].is_null()).collect();
    assert_eq!(roots.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("out/residual_curve.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256 = "));
}

#[test]
fn wronskian_without_spectrum_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssblowup(dir.path(), &["wronskian", "--range", "-1", "1.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("spectrum.json"), "{}", stderr(&o));
    assert!(dir.path().join("out/wronskian.csv").exists());
}

#[test]
fn fit_before_evolve_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssblowup(dir.path(), &["fit", "--run", "blowup"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn small_data_disperses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = ssblowup(dir.path(), &["--config", &cfg, "evolve", "--run", "tiny"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/tiny/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "no-blowup");
    assert!(manifest["blowup_time_estimate"].is_null());
}

#[test]
fn unknown_run_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssblowup(dir.path(), &["evolve", "--run", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut runs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_ssblowup"))
            .args(["--config", &cfg, "--out", out.to_str().unwrap(), "evolve", "--run", "tiny"])
            .output()
            .unwrap();
        assert!(o.status.success());
        let o = Command::new(env!("CARGO_BIN_EXE_ssblowup"))
            .args(["--config", &cfg, "--out", out.to_str().unwrap(), "spectrum", "--range", "-3", "1.5"])
            .output()
            .unwrap();
        assert!(o.status.success());
        runs.push(out);
    }
    for f in ["spectrum.json", "residual_curve.csv", "tiny/kappa.csv", "tiny/manifest.json"] {
        let a = std::fs::read(runs[0].join(f)).unwrap();
        let b = std::fs::read(runs[1].join(f)).unwrap();
        assert!(a == b, "{f} differs between identical runs");
    }
}

#[test]
fn reproduce_spectrum_only_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, "[spectrum]\nlambda_min = -3.0\n\n[wronskian]\nlambda_min = -3.0\n").unwrap();
    let o = ssblowup(dir.path(), &["--config", p.to_str().unwrap(), "reproduce", "--spectrum-only"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("out/report.md")).unwrap();
    assert!(report.contains("spectrum"));
    assert!(dir.path().join("out/wronskian_zeros.json").exists());
}
