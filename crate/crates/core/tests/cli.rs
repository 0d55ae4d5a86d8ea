use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_orbitlab"));
    cmd.env_remove("ORBITLAB_OUT_DIR");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn bundled_scenarios_pass() {
    for entry in fs::read_dir(scenario("")).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().args(["run", "--scenario"]).arg(&path).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), stderr(&out));
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    }
}

#[test]
fn parallel_jobs_match_serial_output() {
    let files = ["shift_chain.json", "omega_shift.json", "disk_gauge.json", "refute_default.json"];
    let run = |jobs: &str| {
        let mut cmd = bin();
        cmd.args(["run", "--jobs", jobs]);
        for f in files {
            cmd.arg("--scenario").arg(scenario(f));
        }
        cmd.output().unwrap()
    };
    let serial = run("1");
    let parallel = run("4");
    assert!(serial.status.success() && parallel.status.success());
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("ORBITLAB_OUT_DIR", dir.path())
        .args(["run", "--format", "csv", "--scenario"])
        .arg(scenario("disk_gauge.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(dir.path().join("disk_gauge.csv")).unwrap();
    assert!(csv.contains("#table,gauges"));
    assert!(csv.contains("2,3/2"));
}

#[test]
fn check_against_stored_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = bin().args(["run", "--scenario"]).arg(scenario("omega_shift.json")).output().unwrap();
    assert!(first.status.success());
    let expected = dir.path().join("expected.json");
    fs::write(&expected, &first.stdout).unwrap();

    let same = bin()
        .args(["run", "--scenario"])
        .arg(scenario("omega_shift.json"))
        .arg("--check")
        .arg(&expected)
        .output()
        .unwrap();
    assert_eq!(same.status.code(), Some(0));

    let mut altered: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    altered["window"] = 7.into();
    fs::write(&expected, altered.to_string()).unwrap();
    let differs = bin()
        .args(["run", "--scenario"])
        .arg(scenario("omega_shift.json"))
        .arg("--check")
        .arg(&expected)
        .output()
        .unwrap();
    assert_eq!(differs.status.code(), Some(1));
    assert!(stderr(&differs).contains("differs"));
}

#[test]
fn failing_regression_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let doc = serde_json::json!({
        "name": "omega_regression",
        "window": 6,
        "task": { "kind": "hypercyclic", "action": "omega_shift", "x0": ["2:1"], "horizon": 3 },
        "expected": { "orbit": [["2:1/1"], ["1:1/1"], ["1:5/1"]] }
    });
    fs::write(&path, doc.to_string()).unwrap();
    let out = bin().args(["run", "--format", "text", "--scenario"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL regression"));
}

#[test]
fn schema_errors_exit_two_with_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"name":"bad","window":4,"task":{"kind":"transport","stages":"three"}}"#).unwrap();
    let out = bin().args(["run", "--scenario"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("SCHEMA"), "{}", stderr(&out));
    assert!(stderr(&out).contains("task.stages"), "{}", stderr(&out));

    let missing = bin().args(["run", "--scenario", "/nonexistent/x.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let usage = bin().args(["run"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn subcommands_build_scenarios_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };
    let basis = write("basis.json", r#"[["1:1"],["1:1","2:1"],["3:1"],["4:1"],["5:1"],["6:1"]]"#);
    let out = bin()
        .args(["triangularize", "--stages", "2", "--format", "text", "--basis"])
        .arg(&basis)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("all checks passed"));

    let seq = write("seq.json", r#"[["1:1"],["2:1/2"],["3:1/4"]]"#);
    let queries = write("q.json", r#"[["2:1"]]"#);
    let out = bin()
        .args(["disks", "--from-null-seq"])
        .arg(&seq)
        .arg("--query")
        .arg(&queries)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));

    let out = bin().args(["hypercyclic", "build-shift", "--window", "6", "--samples", "50"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));

    let out = bin()
        .args(["hypercyclic", "witness", "--window", "10", "--seed", "4", "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("#table,witnesses"));

    let out = bin().args(["hypercyclic", "refute", "--window", "6", "--horizon", "10"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
}
