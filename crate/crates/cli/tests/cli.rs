use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qmem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmem")).args(args).output().expect("spawn qmem")
}

fn stdout_json(args: &[&str]) -> Value {
    let out = qmem(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn scratch(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn assert_valid(schema: &str, instance: &Value) {
    let text = std::fs::read_to_string(repo_path(&format!("docs/schemas/{schema}.json"))).unwrap();
    let schema_json: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema_json).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}");
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn reduce_qubit1_drift() {
    let v = stdout_json(&["reduce", "--preset", "qubit1", "--gamma", "1"]);
    assert_valid("reduce", &v);
    let a = &v["state_space"]["A"];
    let want = [[-1.0, -0.5], [-1.5, -1.0]];
    for (i, row) in want.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let (re, im) = complex(&a[i][j]);
            assert!((re - x).abs() < 1e-12 && im.abs() < 1e-12, "A[{i}][{j}] = {re}+{im}i");
        }
    }
}

#[test]
fn analyze_qubit2_finds_the_protected_mode() {
    let out = qmem(&["analyze", "--preset", "qubit2", "--gamma", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"dfs_indices\":[1]"), "{text}");
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_valid("analyze", &v);
    let mut eig: Vec<f64> = v["eigenvalues"].as_array().unwrap().iter().map(|z| complex(z).0).collect();
    eig.sort_by(f64::total_cmp);
    assert!((eig[0] + 1.0).abs() < 1e-10 && eig[1].abs() < 1e-10, "{eig:?}");
}

#[test]
fn protocol_example() {
    let v = stdout_json(&["protocol", "--n", "1", "--gamma", "1", "--beta", "1", "--t0", "-60", "--t1", "0", "--t2", "100", "--t3", "160"]);
    assert_valid("protocol", &v);
    assert!(v["write_efficiency"].as_f64().unwrap() >= 0.999);
}

#[test]
fn coherent_protocol_validates() {
    let v = stdout_json(&["protocol", "--n", "2", "--beta", "0.5,1-0.5i", "--coherent", "--t0", "-40"]);
    assert_valid("protocol", &v);
    assert!(v["storage_state"].is_null());
}

#[test]
fn every_json_output_matches_its_schema() {
    let cases: [(&str, &[&str]); 6] = [
        ("reduce", &["reduce", "--preset", "quditN-2", "--n", "2"]),
        ("analyze", &["analyze", "--preset", "qudit3-1"]),
        ("pulse", &["--format", "json", "pulse", "--n", "2", "--kind", "emission"]),
        ("simulate", &["--format", "json", "simulate", "--preset", "qubit1", "--beta", "1", "--t0", "-30"]),
        ("sweep", &["sweep", "--eps", "0,0.01", "--duration", "20"]),
        ("model", &["reduce", "--preset", "qubit2"]),
    ];
    for (schema, args) in cases {
        let v = stdout_json(args);
        let instance = if schema == "model" { v["model"].clone() } else { v };
        assert_valid(schema, &instance);
    }
}

#[test]
fn bundled_network_matches_preset() {
    let file = repo_path("crates/core/networks/qubit_config1.qnet");
    let dsl = stdout_json(&["reduce", "--input", file.to_str().unwrap()]);
    let preset = stdout_json(&["reduce", "--preset", "qubit1"]);
    assert_valid("reduce", &dsl);
    let flat = |v: &Value| -> Vec<f64> {
        let mut out = Vec::new();
        for row in v["state_space"]["A"].as_array().unwrap() {
            for z in row.as_array().unwrap() {
                let (re, im) = complex(z);
                out.extend([re, im]);
            }
        }
        out
    };
    for (x, y) in flat(&dsl).iter().zip(flat(&preset)) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn reduced_model_reloads_from_json() {
    let first = stdout_json(&["reduce", "--preset", "qubit1", "--gamma", "2"]);
    let path = scratch("qubit1_model.json");
    std::fs::write(&path, serde_json::to_string(&first["model"]).unwrap()).unwrap();
    let again = stdout_json(&["reduce", "--input", path.to_str().unwrap()]);
    assert_eq!(first["model"], again["model"]);
    assert_eq!(first["state_space"], again["state_space"]);
}

#[test]
fn output_flag_writes_file() {
    let path = scratch("analyze_out.json");
    let _ = std::fs::remove_file(&path);
    let out = qmem(&["--output", path.to_str().unwrap(), "analyze", "--preset", "qubit2"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_valid("analyze", &v);
}

#[test]
fn csv_outputs_have_headers() {
    let out = qmem(&["pulse", "--kind", "read"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,"), "{header}");
    let width = header.split(',').count();
    assert!(lines.all(|l| l.split(',').count() == width));

    let out = qmem(&["--format", "csv", "sweep", "--eps", "0,0.01", "--duration", "20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.lines().next().unwrap().contains("epsilon"));
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_qmem"))
            .args(["sweep", "--eps", "0,0.001,0.01,0.05", "--duration", "50"])
            .env("QMEM_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_qmem"))
        .args(["sweep", "--eps", "0"])
        .env("QMEM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1() {
    let missing = scratch("does_not_exist.qnet");
    let cases: Vec<Vec<&str>> = vec![
        vec!["frobnicate"],
        vec!["reduce", "--preset", "qubit1", "--bogus"],
        vec!["reduce", "--preset", "qubit9"],
        vec!["reduce", "--input", missing.to_str().unwrap()],
        vec!["protocol", "--t0", "10", "--t1", "0"],
        vec!["protocol", "--dt", "0"],
        vec!["protocol", "--beta", "1", "--alpha0", "0.5"],
        vec!["sweep", "--mirror", "q7"],
    ];
    for args in cases {
        let out = qmem(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn malformed_file_reports_position() {
    let file = repo_path("crates/core/networks/invalid/unknown_identifier.qnet");
    let out = qmem(&["reduce", "--input", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("2:"), "{err}");
}

#[test]
fn numerical_failure_exits_2() {
    let file = repo_path("crates/core/networks/invalid/algebraic_loop.qnet");
    let out = qmem(&["reduce", "--input", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
}

#[test]
fn help_exits_0() {
    assert_eq!(qmem(&["--help"]).status.code(), Some(0));
    assert_eq!(qmem(&["protocol", "--help"]).status.code(), Some(0));
}
