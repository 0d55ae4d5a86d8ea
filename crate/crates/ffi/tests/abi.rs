use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use orbitlab_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    orbitlab_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = orbitlab_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_str().unwrap().to_owned()
}

const HALF: &str = r#"{"base":"identity","terms":[{"f":["1:1/1"],"v":["1:1/2"]}]}"#;

#[test]
fn invert_and_apply_round_trip() {
    unsafe {
        let mut j = ptr::null_mut();
        assert_eq!(orbitlab_operator_from_json(c(HALF).as_ptr(), &mut j), OrbitlabStatus::Ok);
        assert!(orbitlab_last_error().is_null());
        let mut inv = ptr::null_mut();
        assert_eq!(orbitlab_operator_invert(j, &mut inv), OrbitlabStatus::Ok);

        let mut out = ptr::null_mut();
        assert_eq!(orbitlab_operator_apply(inv, c(r#"["1:3/2"]"#).as_ptr(), &mut out), OrbitlabStatus::Ok);
        assert_eq!(take(out), r#"["1:1/1"]"#);

        // I − δ₁⊗(⅓, 0)
        assert_eq!(orbitlab_operator_to_json(inv, &mut out), OrbitlabStatus::Ok);
        let json: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(json["terms"][0]["v"], serde_json::json!(["1:-1/3"]));

        let mut id = ptr::null_mut();
        assert_eq!(orbitlab_operator_compose(inv, j, &mut id), OrbitlabStatus::Ok);
        assert_eq!(orbitlab_operator_apply(id, c(r#"["1:5/7","3:2/1"]"#).as_ptr(), &mut out), OrbitlabStatus::Ok);
        assert_eq!(take(out), r#"["1:5/7","3:2/1"]"#);

        for h in [j, inv, id] {
            orbitlab_operator_free(h);
        }
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut op = ptr::null_mut();
        assert_eq!(orbitlab_operator_from_json(c("{").as_ptr(), &mut op), OrbitlabStatus::Parse);
        assert!(op.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(orbitlab_operator_from_json(ptr::null(), &mut op), OrbitlabStatus::NullPointer);
        assert_eq!(orbitlab_operator_from_json(c(HALF).as_ptr(), ptr::null_mut()), OrbitlabStatus::NullPointer);

        let bad_utf8 = CString::new(vec![0xff, 0xfe]).unwrap();
        assert_eq!(orbitlab_operator_from_json(bad_utf8.as_ptr(), &mut op), OrbitlabStatus::InvalidUtf8);

        // I + δ₁⊗(−e₁) annihilates e₁
        let singular = r#"{"base":"identity","terms":[{"f":["1:1/1"],"v":["1:-1/1"]}]}"#;
        assert_eq!(orbitlab_operator_from_json(c(singular).as_ptr(), &mut op), OrbitlabStatus::Ok);
        let mut inv = ptr::null_mut();
        assert_eq!(orbitlab_operator_invert(op, &mut inv), OrbitlabStatus::Singular);
        assert!(last_error().starts_with("SINGULAR"));
        assert!(inv.is_null());
        orbitlab_operator_free(op);

        let mut out = ptr::null_mut();
        assert_eq!(orbitlab_operator_apply(ptr::null(), c("[]").as_ptr(), &mut out), OrbitlabStatus::NullPointer);
        orbitlab_operator_free(ptr::null_mut());
        orbitlab_string_free(ptr::null_mut());
    }
}

#[test]
fn scenario_reports_pass_and_fail() {
    let doc = serde_json::json!({
        "name": "ffi_shift",
        "window": 6,
        "task": { "kind": "hypercyclic", "action": "build_shift", "samples": 20 }
    });
    unsafe {
        let mut out = ptr::null_mut();
        let mut passed = false;
        let status = orbitlab_run_scenario(c(&doc.to_string()).as_ptr(), &mut out, &mut passed);
        assert_eq!(status, OrbitlabStatus::Ok);
        assert!(passed);
        let report: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(report["scenario"], "ffi_shift");

        let mut wrong = doc.clone();
        wrong["expected"] = serde_json::json!({ "checks": [] });
        assert_eq!(orbitlab_run_scenario(c(&wrong.to_string()).as_ptr(), &mut out, &mut passed), OrbitlabStatus::Ok);
        assert!(!passed);
        orbitlab_string_free(out);

        let bad = r#"{"name":"x","window":4,"task":{"kind":"nope"}}"#;
        let status = orbitlab_run_scenario(c(bad).as_ptr(), &mut out, ptr::null_mut());
        assert_eq!(status, OrbitlabStatus::Schema);
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(orbitlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/abi-<hash>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/orbitlab.h")).unwrap();
    for name in [
        "orbitlab_last_error",
        "orbitlab_version",
        "orbitlab_operator_from_json",
        "orbitlab_operator_to_json",
        "orbitlab_operator_apply",
        "orbitlab_operator_invert",
        "orbitlab_operator_compose",
        "orbitlab_operator_free",
        "orbitlab_run_scenario",
        "orbitlab_string_free",
        "typedef struct OrbitlabOperator OrbitlabOperator",
        "ORBITLAB_STATUS_SINGULAR = 6",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = target_dir().join("liborbitlab_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("orbitlab "));
}
