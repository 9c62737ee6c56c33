use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn sqkd(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqkd"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env_remove("SQKD_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const HONEST: &str = r#"{"session": {"L": 64, "delta": 0.25, "seed": 5}, "attack": "none"}"#;

#[test]
fn honest_run_yields_matching_128_bit_keys() {
    let dir = TempDir::new().unwrap();
    let out = sqkd(&["run"], &write(&dir, "c.json", HONEST));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["N"], 320);
    assert_eq!(v["result"]["status"], "Completed");
    let alice = v["result"]["alice_key"].as_str().unwrap();
    assert_eq!(alice.len(), 128);
    assert_eq!(v["result"]["bob_key"].as_str().unwrap(), alice);
    assert_eq!(v["result"]["records"].as_array().unwrap().len(), 320);
    let rec = &v["result"]["records"][0];
    for field in ["round", "bob_action", "bob_outcome", "alice_basis", "alice_outcome", "used_for"] {
        assert!(rec.get(field).is_some(), "{field}");
    }
}

#[test]
fn intercept_resend_aborts_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"session": {"L": 64, "seed": 1}, "attack": {"kind": "intercept_resend", "fake": {"fixed": "Hs"}}}"#,
    );
    let out = sqkd(&["run"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["result"]["status"], "AbortedStep5");
}

#[test]
fn config_errors_exit_1_with_anchored_diagnostics() {
    let dir = TempDir::new().unwrap();
    let out = sqkd(&["run"], &dir.path().join("missing.json"));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.json"));

    let cfg = write(&dir, "syntax.json", "{\n  \"session\": {\"L\": 8,},\n  \"attack\": \"none\"\n}");
    let out = sqkd(&["run"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("syntax.json:2:"), "{}", stderr(&out));

    let cfg = write(&dir, "field.json", "{\n  \"session\": {\"L\": 8, \"colour\": 1},\n  \"attack\": \"none\"\n}");
    let out = sqkd(&["run"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("field.json:2:") && stderr(&out).contains("colour"), "{}", stderr(&out));

    let cfg = write(&dir, "delta.json", "{\n  \"session\": {\"L\": 8, \"delta\": -1},\n  \"attack\": \"none\"\n}");
    let out = sqkd(&["run"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("delta.json:2:3: invalid configuration: delta"), "{}", stderr(&out));

    for body in ["", "[]", "null", "{\"session\": 3, \"attack\": \"none\"}", "{\"session\": {\"L\": 1e400}}"] {
        let out = sqkd(&["run"], &write(&dir, "junk.json", body));
        assert_eq!(out.status.code(), Some(1), "{body}");
    }
}

#[test]
fn non_unitary_matrix_reports_residual() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"session": {"L": 4},
            "attack": {"kind": "entangle_measure", "epsilon": [[1, 0]],
                       "u_e": [[[1,0],[0,0],[0,0],[0,0]], [[1,0],[1,0],[0,0],[0,0]],
                               [[0,0],[0,0],[1,0],[0,0]], [[0,0],[0,0],[0,0],[1,0]]]}}"#,
    );
    let out = sqkd(&["theorem1"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unitarity residual"), "{}", stderr(&out));
}

#[test]
fn theorem1_presets() {
    let dir = TempDir::new().unwrap();
    let run = |preset: &str| {
        let cfg = write(&dir, "c.json", &format!(r#"{{"session": {{"L": 4, "seed": 3}}, "attack": "{preset}"}}"#));
        let out = sqkd(&["theorem1"], &cfg);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        json(&out)["result"].clone()
    };
    let r = run("probe-only-random");
    assert_eq!(r["verdict"], "PASS");
    assert!(r["max_pairwise_trace_distance"].as_f64().unwrap() < 1e-9);
    let r = run("identity");
    assert_eq!(r["verdict"], "PASS");
    assert_eq!(r["error_ctrl"].as_f64().unwrap(), 0.0);
    let r = run("controlled-orthogonal");
    assert_eq!(r["verdict"], "NOT_APPLICABLE");
    assert!((r["error_ctrl"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    for pair in r["pairwise_distances"].as_array().unwrap() {
        assert!((pair[2].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    let cfg = write(&dir, "c.json", HONEST);
    assert_eq!(sqkd(&["theorem1"], &cfg).status.code(), Some(1));
}

#[test]
fn detect_reports_sampled_exact_and_difference() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"session": {"L": 4, "seed": 2}, "attack": {"kind": "measure_resend", "basis": "uniform"}}"#,
    );
    let out = sqkd(&["detect", "--trials", "20000"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["config"]["trials"], 20000);
    let row = &v["result"]["comparison"][0];
    assert_eq!(row["quantity"], "ctrl_detection");
    assert_eq!(row["exact"].as_f64().unwrap(), 0.4375);
    let diff = row["sampled"].as_f64().unwrap() - 0.4375;
    assert!((row["difference"].as_f64().unwrap() - diff).abs() < 1e-15);

    let cfg = write(&dir, "c.json", r#"{"session": {"L": 4}, "attack": "none"}"#);
    let v = json(&sqkd(&["detect", "--trials", "500"], &cfg));
    for row in v["result"]["comparison"].as_array().unwrap() {
        if !["ctrl_detection", "sift_mismatch", "any_detection"].contains(&row["quantity"].as_str().unwrap()) {
            continue;
        }
        assert_eq!(row["sampled"].as_f64().unwrap(), 0.0);
        assert_eq!(row["exact"].as_f64().unwrap(), 0.0);
    }

    let cfg = write(&dir, "c.json", r#"{"session": {"L": 4}, "attack": "controlled-orthogonal"}"#);
    let out = sqkd(&["detect", "--trials", "500"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["result"]["exact_oracle"].as_str().unwrap().starts_with("unsupported"));
    assert!(v["result"]["exact"].is_null());
    let table = sqkd(&["detect", "--trials", "500", "--output", "table"], &cfg);
    assert!(String::from_utf8_lossy(&table.stdout).contains("n/a (no exact oracle)"));

    assert_eq!(sqkd(&["detect", "--trials", "99"], &cfg).status.code(), Some(1));
}

#[test]
fn seed_precedence_flag_then_env_then_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", HONEST);
    let seed_of = |out: Output| json(&out)["config"]["session"]["seed"].as_u64().unwrap();
    assert_eq!(seed_of(sqkd(&["capacity"], &cfg)), 5);
    let with_env = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_sqkd"))
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .env("SQKD_SEED", "77")
            .output()
            .unwrap()
    };
    assert_eq!(seed_of(with_env(&["capacity"])), 77);
    assert_eq!(seed_of(with_env(&["capacity", "--seed", "9"])), 9);
    let bad = Command::new(env!("CARGO_BIN_EXE_sqkd"))
        .args(["capacity", "--config"])
        .arg(&cfg)
        .env("SQKD_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn outputs_and_destinations() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", HONEST);
    let csv = sqkd(&["run", "--output", "csv"], &cfg);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,bob_action,bob_outcome,alice_basis,alice_outcome,used_for"));
    assert_eq!(lines.count(), 320);

    let dest = dir.path().join("report.json");
    let out = sqkd(&["capacity", "--out", dest.to_str().unwrap()], &cfg);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(v["command"], "capacity");
    assert_eq!(v["result"]["ratio"].as_f64().unwrap(), 2.0);

    let table = sqkd(&["capacity", "--output", "table"], &cfg);
    assert!(String::from_utf8_lossy(&table.stdout).contains("ratio"));
}

#[test]
fn baseline_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", HONEST);
    let out = sqkd(&["baseline"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["result"]["alice_key"].as_str().unwrap().len(), 64);

    let cfg = write(
        &dir,
        "b.json",
        r#"{"session": {"L": 64, "seed": 4}, "attack": {"kind": "intercept_resend", "fake": "0"}}"#,
    );
    let out = sqkd(&["baseline"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["result"]["status"], "AbortedStep5");
}

#[test]
fn usage_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", HONEST);
    assert_eq!(sqkd(&["run", "--bogus"], &cfg).status.code(), Some(1));
    assert_eq!(sqkd(&["run", "--threads", "0"], &cfg).status.code(), Some(1));
    assert_eq!(sqkd(&["run", "--output", "xml"], &cfg).status.code(), Some(1));
    let no_config = Command::new(env!("CARGO_BIN_EXE_sqkd")).arg("run").output().unwrap();
    assert_eq!(no_config.status.code(), Some(1));
    let help = Command::new(env!("CARGO_BIN_EXE_sqkd")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}
