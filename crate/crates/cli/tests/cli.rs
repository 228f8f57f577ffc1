use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn virial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virial"))
        .args(args)
        .output()
        .expect("spawn virial")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scenario(name: &str) -> String {
    scenarios().join(name).to_string_lossy().into_owned()
}

fn short_oscillator(dir: &Path) -> PathBuf {
    let p = dir.join("osc.json");
    fs::write(
        &p,
        r#"{"name": "osc", "model": {"name": "oscillator", "params": {"k": 4.0, "dim": 1}},
            "formalism": "tstarq", "integrator": {"t_max": 5.0, "dense_dt": 0.01}}"#,
    )
    .unwrap();
    p
}

#[test]
fn missing_scenario_is_an_io_error() {
    let out = virial(&["validate", "--scenario", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, "{ not json").unwrap();
    let out = virial(&["validate", "--scenario", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn indefinite_inertia_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rb.json");
    fs::write(
        &p,
        r#"{"model": {"name": "rigid_body_lagrangian", "params": {"inertia": [1.0, -2.0, 3.0]}}}"#,
    )
    .unwrap();
    let out = virial(&["validate", "--scenario", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_model_fails_check() {
    assert_eq!(virial(&["check", "--model", "no_such_model"]).status.code(), Some(1));
}

#[test]
fn every_model_passes_check() {
    let out = virial(&["list-models", "--json"]);
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for row in rows.as_array().unwrap() {
        let name = row["name"].as_str().unwrap();
        let c = virial(&["check", "--model", name]);
        assert_eq!(c.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&c.stdout));
    }
}

#[test]
fn listed_templates_validate() {
    let out = virial(&["list-models", "--json"]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rows = rows.as_array().unwrap();
    assert!(rows.len() >= 5);
    for row in rows {
        let name = row["name"].as_str().unwrap();
        assert!(!row["formalisms"].as_array().unwrap().is_empty());
        let p = dir.path().join(format!("{name}.json"));
        fs::write(&p, serde_json::to_string_pretty(&row["scenario"]).unwrap()).unwrap();
        let v = virial(&["validate", "--scenario", p.to_str().unwrap()]);
        assert_eq!(v.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&v.stderr));
    }
}

#[test]
fn shipped_scenarios_validate() {
    for e in fs::read_dir(scenarios()).unwrap() {
        let p = e.unwrap().path();
        let v = virial(&["validate", "--scenario", p.to_str().unwrap()]);
        assert_eq!(v.status.code(), Some(0), "{}", p.display());
    }
}

#[test]
fn run_writes_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_oscillator(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = virial(&["run", "--scenario", sc.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["trajectory.csv", "report.json", "convergence.csv"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert!(report["virials"].as_array().is_some_and(|v| !v.is_empty()));
}

#[test]
fn tmax_and_period_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_oscillator(dir.path());
    let out_dir = dir.path().join("o");
    let out = virial(&[
        "run", "--scenario", sc.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
        "--tmax", "2.5", "--period", "none",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["t_end"].as_f64(), Some(2.5));

    let bad = virial(&["run", "--scenario", sc.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--period", "soon"]);
    assert_ne!(bad.status.code(), Some(0));
    let neg = virial(&["run", "--scenario", sc.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--tmax=-1"]);
    assert_eq!(neg.status.code(), Some(1));
}

#[test]
fn run_without_output_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = short_oscillator(dir.path());
    assert_eq!(virial(&["run", "--scenario", sc.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn batch_runs_each_scenario_and_reports_worst_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    fs::copy(short_oscillator(dir.path()), input.join("osc.json")).unwrap();
    fs::copy(scenario("kepler_e05.json"), input.join("kepler.json")).unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_virial"))
        .args(["run", "--batch", input.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .env("VIRIAL_BATCH_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for stem in ["osc", "kepler"] {
        assert!(out_dir.join(stem).join("report.json").exists(), "{stem}");
    }

    fs::write(input.join("zz_broken.json"), r#"{"model": {"name": "nope"}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_virial"))
        .args(["run", "--batch", input.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .env("VIRIAL_BATCH_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz_broken"));

    let out = Command::new(env!("CARGO_BIN_EXE_virial"))
        .args(["run", "--batch", input.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .env("VIRIAL_BATCH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
