use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulseforge"))
        .args(args)
        .current_dir(root())
        .output()
        .unwrap()
}

fn write_config(dir: &Path, config: Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, config.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn assert_schema(schema: &str, instance: &Value) {
    let text = fs::read_to_string(root().join("schemas").join(schema)).unwrap();
    let validator = jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}");
}

fn assert_error(out: &Output, code: i32, kind: &str) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let err: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_schema("error.schema.json", &err);
    assert_eq!(err["error"], kind);
}

#[test]
fn classify_shipped_configs() {
    for (file, class) in [
        ("system1.json", "SystemI"),
        ("system2.json", "SystemII"),
        ("system3.json", "SystemIII"),
    ] {
        let out = run(&["classify", "--config", &format!("configs/{file}")]);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_schema("classify.schema.json", &v);
        assert_eq!(v["class"], class);
    }
}

#[test]
fn synth_shipped_configs() {
    for file in ["system1.json", "system2.json", "system3.json", "two_level.json", "random_system1.json"] {
        let out = run(&["synth", "--config", &format!("configs/{file}")]);
        assert!(out.status.success(), "{file}: {}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_schema("report.schema.json", &v);
        assert!(v["analytic_fidelity"].as_f64().unwrap() > 1.0 - 1e-9, "{file}");
        assert!(v["exact_fidelity"].as_f64().unwrap() > 0.999, "{file}");
    }
}

#[test]
fn sweep_json_matches_schema() {
    let out = run(&["sweep", "--config", "configs/system2.json", "--format", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_schema("sweep.schema.json", &v);
    assert!(v["fit"]["slope"].as_f64().unwrap() < -1.5);
}

#[test]
fn sweep_csv_has_rows_and_summary() {
    let out = run(&["sweep", "--config", "configs/system3.json", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ratio,fidelity,infidelity,status");
    assert_eq!(lines.iter().filter(|l| l.ends_with(",ok")).count(), 3);
}

#[test]
fn trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let out = run(&[
        "synth",
        "--config",
        "configs/system3.json",
        "--trajectory",
        path.to_str().unwrap(),
        "--samples",
        "11",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "time,re_1,im_1,re_2,im_2,re_3,im_3");
    assert_eq!(lines.len(), 12);
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("class.json");
    let out = run(&["classify", "--config", "configs/system2.json", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["class"], "SystemII");
}

#[test]
fn seeded_random_target_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "system": { "energies": [0.0, 1.0, 3.0, 5.0] } }));
    let a = run(&["synth", "--config", &cfg, "--seed", "7"]);
    let b = run(&["synth", "--config", &cfg, "--seed", "7"]);
    let c = run(&["synth", "--config", &cfg, "--seed", "8"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn usage_errors_exit_2() {
    assert_error(&run(&["frobnicate"]), 2, "Usage");
    assert_error(&run(&["classify"]), 2, "Usage");
    assert_error(&run(&["classify", "--config", "no/such/file.json"]), 2, "Config");

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "system": { "energies": [0.0, 1.0] }, "colour": 3 }));
    assert_error(&run(&["classify", "--config", &cfg]), 2, "Config");

    let cfg = write_config(
        dir.path(),
        json!({ "system": { "energies": [0.0, 1.0, 2.0] }, "sweep": { "ratios": [100.0] } }),
    );
    assert_eq!(run(&["sweep", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn degenerate_spectrum_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "system": { "energies": [0.0, 1.0, 1.0] } }));
    assert_error(&run(&["classify", "--config", &cfg]), 3, "Degenerate");
}

#[test]
fn unreachable_ladder_target_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        json!({
            "system": { "energies": [0.0, 1.0, 2.0] },
            "target": { "amplitudes": [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]] }
        }),
    );
    assert_error(&run(&["synth", "--config", &cfg]), 4, "UnreachableTarget");
}

#[test]
fn target_dimension_mismatch_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        json!({
            "system": { "energies": [0.0, 1.0, 3.0] },
            "target": { "amplitudes": [[1.0, 0.0], [0.0, 0.0]] }
        }),
    );
    assert_error(&run(&["synth", "--config", &cfg]), 6, "DimensionMismatch");
}

#[test]
fn unsupported_class_exits_7() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "system": { "energies": [0.0, 1.0, 3.0, 6.0] } }));
    assert_error(&run(&["synth", "--config", &cfg]), 7, "UnsupportedGapClass");
}

#[test]
fn verify_accepts_bare_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&["synth", "--config", "configs/system1.json"]);
    let v: Value = serde_json::from_slice(&report.stdout).unwrap();
    let path = dir.path().join("protocol.json");
    fs::write(&path, v["protocol"].to_string()).unwrap();
    let out = run(&["verify", "--config", "configs/system1.json", "--protocol", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let w: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["exact_fidelity"], w["exact_fidelity"]);
}
