//! End-to-end runs of the `canfield` binary.

use std::path::Path;
use std::process::{Command, Output};

fn canfield(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canfield"))
        .args(args)
        .env_remove("CANFIELD_OUT")
        .current_dir(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn passing_run_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = canfield(&["analyze", "catalog:sphere:r=1", "--out", "r"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("r/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
    assert_eq!(v["provenance"]["input"], "catalog:sphere:r=1");
}

#[test]
fn failed_assertions_exit_one_but_still_write() {
    let dir = tempfile::tempdir().unwrap();
    let o = canfield(&["analyze", "catalog:sphere:r=1", "--tol", "1e-30", "--out", "r"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(dir.path().join("r/report.json").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn input_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.imm"), "dim 2 -> 3;\nx1 = u1 * ;\n").unwrap();
    let o = canfield(&["analyze", "bad.imm"], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2:"), "{err}");

    assert_eq!(code(&canfield(&["analyze", "catalog:nope"], dir.path())), 2);
    assert_eq!(code(&canfield(&["analyze", "missing.imm"], dir.path())), 2);
    assert_eq!(code(&canfield(&["analyze", "catalog:sphere:r=1", "--suite", "bogus"], dir.path())), 2);
    assert_eq!(code(&canfield(&["analyze", "catalog:sphere:r=1", "--grid", "4,x"], dir.path())), 2);
    assert!(!dir.path().join("canfield-out").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = canfield(&["analyze", "catalog:torus:R=3,r=1", "--seed", "11", "--format", "both", "--out", out], dir.path());
        assert_eq!(code(&o), 0);
    }
    for f in ["report.json", "report.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn csv_has_one_row_per_point_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = canfield(&["analyze", "catalog:cylinder:r=1", "--suite", "yamabe", "--grid", "5,7", "--format", "csv", "--out", "r"], dir.path());
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("r/report.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["index", "u", "quantity", "value"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let series: std::collections::BTreeSet<String> = rows.iter().map(|r| r[2].to_string()).collect();
    assert!(!series.is_empty());
    assert_eq!(rows.len(), 35 * series.len());
    assert!(!dir.path().join("r/report.json").exists());
}

#[test]
fn config_file_and_environment_set_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# sphere run\ninput = catalog:sphere:r=2\nsuite = yamabe\ngrid = 4,4\nout = from-config\n").unwrap();
    let o = canfield(&["analyze", "--config", "run.cfg"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("from-config/report.json")).unwrap()).unwrap();
    assert_eq!(v["provenance"]["grid"], serde_json::json!([4, 4]));
    assert!(v["geometry"].is_null());

    let o = Command::new(env!("CARGO_BIN_EXE_canfield"))
        .args(["analyze", "catalog:circle:r=1", "--suite", "geometry"])
        .env("CANFIELD_OUT", "from-env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("from-env/report.json").exists());

    std::fs::write(dir.path().join("bad.cfg"), "input = catalog:sphere:r=1\ngrid 4\n").unwrap();
    let o = canfield(&["analyze", "--config", "bad.cfg"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn catalog_list_names_every_entry() {
    let dir = tempfile::tempdir().unwrap();
    let o = canfield(&["catalog", "list"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for e in canfield::dsl::catalog_entries() {
        assert!(text.contains(e.name), "{}", e.name);
    }
}

#[test]
fn shipped_definition_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = concat!(env!("CARGO_MANIFEST_DIR"), "/specs/saddle.imm");
    let o = canfield(&["analyze", spec, "--out", "r"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/report.json")).unwrap()).unwrap();
    assert_eq!(v["conformal"]["classification"]["class"], "none");
}
