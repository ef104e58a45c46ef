use std::process::Command;

use serde_json::Value;

fn hardylab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hardylab")).args(args).output().unwrap()
}

#[test]
fn constants_example() {
    let out = hardylab(&["constants", "--p", "2", "--beta", "-2", "--k", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.contains("sharp=0.25"), "{s}");
    assert!(s.contains("remainder=0.25"), "{s}");
    assert!(s.contains("T=7.38905609893"), "{s}");
}

#[test]
fn p_at_most_one_is_a_config_error() {
    let out = hardylab(&["constants", "--p", "1", "--beta", "-2", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p>1"));
}

#[test]
fn malformed_flags_exit_two() {
    assert_eq!(hardylab(&["sweep-sharp", "--model", "klein-bottle"]).status.code(), Some(2));
    assert_eq!(hardylab(&["sweep-sharp"]).status.code(), Some(2));
    assert_eq!(hardylab(&["sweep-remainder", "--model", "cylinder-axis", "--theta", "0.2"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_hardylab"))
        .args(["constants", "--p", "2", "--k", "1"])
        .env("HARDYLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn torus_must_fit_inside_injectivity_radius() {
    let out = hardylab(&["sweep-sharp", "--model", "torus", "--m", "2", "--n", "1", "--eta", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_versioned_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hardylab"))
        .args(["sweep-sharp", "--model", "cylinder-section", "--n", "1", "--p", "2", "--beta", "-2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config"]["experiment"], "sweep-sharp");
    assert_eq!(report["all_confirmed"], true);
    assert!(report["results"].as_array().unwrap().iter().any(|r| r["name"] == "sweep_sharp"));
    assert!(report["verdicts"].as_array().unwrap().iter().all(|v| v["passed"] == true));
    let csv = std::fs::read_to_string(dir.path().join("sweep_sharp.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,quotient,envelope,constant,gap"));
    assert_eq!(lines.count(), 10);
    assert!(!csv.contains('\r'));
}

#[test]
fn json_only_format_writes_no_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hardylab"))
        .args(["compare-jacobi", "--format", "json", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("report.json")]);
}

#[test]
fn verify_all_with_torus_model_exits_zero() {
    let out = hardylab(&["verify-all", "--model", "torus", "--m", "2", "--n", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn sequential_flag_gives_identical_csv() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (d, extra) in dirs.iter().zip([None, Some("--sequential")]) {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_hardylab"));
        cmd.args(["sweep-remainder", "--model", "cylinder-axis", "--n", "1", "--format", "csv", "--out"]).arg(d.path());
        if let Some(x) = extra {
            cmd.arg(x);
        }
        assert!(cmd.output().unwrap().status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("sweep_remainder.csv")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
}
