use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phigamma"))
}

fn run(args: &[&str]) -> Output {
    bin().arg("--stdout").args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn defaults_are_echoed() {
    let out = run(&["pairing-table"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = &report(&out)["config"];
    assert_eq!(cfg["p"], 3);
    assert_eq!(cfg["N"], 12);
    assert_eq!(cfg["G"], 4);
    assert_eq!(cfg["D"], 60);
    assert_eq!(cfg["m"], 3);
    assert_eq!(cfg["witt_length"], 3);
}

#[test]
fn flags_override_defaults() {
    let out = run(&["--p", "5", "--prec", "10", "pairing-table"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = &report(&out)["config"];
    assert_eq!(cfg["p"], 5);
    assert_eq!(cfg["N"], 10);
}

#[test]
fn bad_parameters_exit_3() {
    for args in [
        vec!["--p", "4", "pairing-table"],
        vec!["--p", "2", "pairing-table"],
        vec!["--prec", "4", "pairing-table"],
        vec!["--guard", "0", "pairing-table"],
        vec!["--window", "2", "pairing-table"],
        vec!["pairing-table", "--bogus"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn malformed_config_exits_3() {
    let dir = scratch("malformed");
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\"p\": 3, \"N\": ").unwrap();
    let out = run(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    std::fs::write(&path, "{\"p\": 3, \"jobs\": [{\"cmd\": \"no-such-job\"}]}").unwrap();
    assert_eq!(run(&["--config", path.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn cohomology_of_the_trivial_module() {
    let out = run(&["cohomology", "--twist", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let body = &report(&out)["jobs"][0]["body"];
    assert_eq!(body["dims"], serde_json::json!([1, 2, 0]));
    assert_eq!(body["converged"], serde_json::json!([true, true, true]));
    assert_eq!(body["euler_characteristic"], -1);
}

#[test]
fn small_window_does_not_converge() {
    let out = run(&["cohomology", "--twist", "0", "--window", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["jobs"][0]["status"], "not-converged");
    assert_eq!(r["summary"]["all_converged"], false);
}

#[test]
fn precondition_inside_a_job_exits_3() {
    let out = run(&["slopes", "--diag", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["jobs"][0]["status"], "rejected");
}

#[test]
fn theta_check_is_exact_at_its_precision() {
    let out = run(&["theta-check", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let body = &report(&out)["jobs"][0]["body"];
    assert_eq!(body["exact_at_precision"], true);
    assert_eq!(body["worst_residual_valuation"], body["precision"]);
}

#[test]
fn small_jobs_succeed() {
    for args in [
        vec!["psi-fixed", "--twist", "1"],
        vec!["exact-seq"],
        vec!["witt-demo"],
        vec!["embed-check"],
        vec!["deform", "--level", "2", "--specialize", "-1"],
        vec!["dcrys", "--lam", "1/3", "--twist", "2"],
        vec!["slopes", "--diag", "1,3,9"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn dcrys_weight_and_slopes() {
    let d = report(&run(&["dcrys", "--lam", "1/3", "--twist", "2"]));
    assert_eq!(d["jobs"][0]["body"]["weight"], 2);
    let s = report(&run(&["slopes", "--diag", "1,3,9"]));
    let body = &s["jobs"][0]["body"];
    assert_eq!(body["degree"], 3);
    assert_eq!(body["etale"], false);
    assert_eq!(body["hn_height"], serde_json::json!({"num": 3, "den": 1}));
}

#[test]
fn config_file_jobs_write_report_and_csv() {
    let dir = scratch("files");
    let cfg = dir.join("run.json");
    std::fs::write(
        &cfg,
        r#"{"p": 3, "jobs": [{"cmd": "cohomology", "twist": 1}, {"cmd": "cohomology", "twist": -1}, {"cmd": "witt-demo"}]}"#,
    )
    .unwrap();
    let out = bin().args(["--config", cfg.to_str().unwrap()]).env("PHIGAMMA_OUT_DIR", &dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("run_report.json")).unwrap()).unwrap();
    assert_eq!(r["summary"]["jobs"], 3);
    assert_eq!(r["jobs"][0]["body"]["dims"], serde_json::json!([0, 2, 1]));
    assert_eq!(r["jobs"][1]["body"]["dims"], serde_json::json!([0, 1, 0]));
    let mut rows = csv::Reader::from_path(dir.join("dims.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].iter().skip(6).take(3).collect::<Vec<_>>(), ["0", "2", "1"]);
}

#[test]
fn reports_are_byte_identical() {
    let args = ["cohomology", "--twist", "1"];
    let a = run(&args);
    let b = run(&args);
    let c = bin().args(["--stdout", "--sequential"]).args(args).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let t1 = run(&["theta-check", "--seed", "7"]);
    let t2 = run(&["theta-check", "--seed", "7"]);
    assert_eq!(t1.stdout, t2.stdout);
}
