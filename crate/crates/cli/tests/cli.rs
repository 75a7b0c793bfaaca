use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn inrob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inrob"))
        .args(args)
        .env("INROB_ASSET_DIR", assets())
        .output()
        .expect("spawn inrob")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn out(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_the_bundled_assets() {
    let a = assets();
    let o = inrob(&[
        "validate",
        s(&a.join("obdh_slp.tioa")),
        s(&a.join("slp_purposes.tp")),
        s(&a.join("default.fem")),
        s(&a.join("obdh_slp.suite")),
        "--network",
        s(&a.join("obdh_slp.tioa")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_without_arguments_is_a_usage_error() {
    assert_eq!(code(&inrob(&["validate"])), 2);
    assert_eq!(code(&inrob(&[])), 2);
}

#[test]
fn validate_rejects_an_undeclared_clock() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(assets().join("obdh_slp.tioa")).unwrap();
    let broken = text.replacen("guard t <= 2", "guard ghost <= 2", 1);
    assert_ne!(broken, text);
    let path = dir.path().join("broken.tioa");
    fs::write(&path, broken).unwrap();
    let o = inrob(&["validate", s(&path)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ghost"));
}

#[test]
fn gen_is_deterministic_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = inrob(&["gen", "--seed", "7", "--out", s(&a)]);
    let second = inrob(&["gen", "--seed", "7", "--out", s(&b)]);
    assert_eq!(code(&first), 0);
    assert_eq!(out(&first).trim(), "nominal 8 robustness 24 total 32");
    assert_eq!(out(&first), out(&second));
    let suite = |d: &Path| fs::read_to_string(d.join("obdh_slp.suite")).unwrap();
    assert_eq!(suite(&a), suite(&b));
    let manifest = fs::read_to_string(a.join("gen.manifest")).unwrap();
    assert!(manifest.starts_with("manifest gen\n"));
    assert!(manifest.contains("\nseed 7\n"));
    assert!(manifest.contains("obdh_slp.suite sha256 "));
}

#[test]
fn gen_without_faults_emits_only_nominal_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = inrob(&["gen", "--faults", "none", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    assert_eq!(out(&o).trim(), "nominal 8 robustness 0 total 8");
}

#[test]
fn unextended_slave_fails_robustness_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = inrob(&[
        "run",
        s(&assets().join("obdh_slp.suite")),
        "--adapter-slave",
        "mil:nominal",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
    let report = fs::read_to_string(dir.path().join("obdh_slp.report")).unwrap();
    assert!(report.contains(" fail"));
    assert!(dir.path().join("run.manifest").exists());
}

#[test]
fn empty_suite_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.suite");
    fs::write(&path, "suite obdh_slp nominal 0 robustness 0\n").unwrap();
    let o = inrob(&["run", s(&path), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn report_rejects_duplicate_case_ids() {
    let dir = tempfile::tempdir().unwrap();
    let o = inrob(&["run", s(&assets().join("obdh_slp.suite")), "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let report = dir.path().join("obdh_slp.report");
    let o = inrob(&["report", s(&report)]);
    assert_eq!(code(&o), 0);
    assert!(out(&o).contains("total 8 24 32"));
    let o = inrob(&["report", s(&report), s(&report)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn asset_dir_is_taken_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_inrob"))
        .args(["gen", "--out", s(dir.path())])
        .env("INROB_ASSET_DIR", dir.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
