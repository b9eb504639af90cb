use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn formlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formlab")).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(name)
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn validate_accepts_fixtures() {
    for name in ["paper_2d.json", "paper_3d.json"] {
        let out = formlab(&["validate", fixture(name).to_str().unwrap()]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        assert!(text(&out.stdout).contains(": ok ("));
    }
}

#[test]
fn validate_reports_every_issue() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("paper_2d.json")).unwrap()).unwrap();
    v["leaders"] = serde_json::json!([4, 8]);
    v["control"]["dt"] = serde_json::json!(0.0);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = formlab(&["validate", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("leaders[1]: agent id 8 out of range"), "{err}");
    assert!(err.contains("control.dt"), "{err}");
}

#[test]
fn run_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = formlab(&[
        "run",
        fixture("paper_2d.json").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--dt",
        "0.002",
        "--seed",
        "3",
        "--integrator",
        "rk4",
        "--mode",
        "causal",
        "--alpha",
        "1.5",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "causal");
    assert_eq!(manifest["dt"], 0.002);
    assert_eq!(manifest["alpha"], 1.5);
    assert_eq!(manifest["seed"], 3);
    let header = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,agent,role,x,y,z,vx,vy,vz\n"));

    let plots = dir.path().join("plots");
    let out = formlab(&[
        "plot",
        "--traj",
        out_dir.join("trajectory.csv").to_str().unwrap(),
        "--err",
        out_dir.join("errors.csv").to_str().unwrap(),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let svg = std::fs::read_to_string(plots.join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<?xml") || svg.starts_with("<svg"));
    for f in ["error_x.svg", "error_y.svg", "error_z.svg"] {
        assert!(plots.join(f).is_file());
    }
}

#[test]
fn run_directory_as_batch() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = fixture("");
    let out = formlab(&["run", scenarios.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--no-plot"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for stem in ["paper_2d", "paper_3d"] {
        assert!(dir.path().join(stem).join("errors.csv").is_file());
        assert!(!dir.path().join(stem).join("trajectory.svg").exists());
    }
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = formlab(&["run", fixture("paper_3d.json").to_str().unwrap(), "--out", d, "--mode", "causal"]);
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("causal mode is unstable"));
    let out = formlab(&["run", "/definitely/missing.json", "--out", d]);
    assert!(!out.status.success());
    let out = formlab(&["run", fixture("paper_2d.json").to_str().unwrap(), "--out", d, "--integrator", "leapfrog"]);
    assert!(!out.status.success());
    let out = formlab(&["plot", "--traj", "/missing.csv", "--err", "/missing.csv", "--out", d]);
    assert!(!out.status.success());
}
