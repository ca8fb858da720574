//! End-to-end checks of the command-line interface: schemas, exit codes,
//! and byte-for-byte determinism of repeated runs.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_madelung"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

#[test]
fn madelung_nacl_3d_json() {
    let out = run(&[
        "madelung",
        "--family",
        "nacl",
        "--dim",
        "3",
        "--a",
        "1",
        "--method",
        "subtracted",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["schema"], 1);
    assert_eq!(json["family"], "nacl");
    assert_eq!(json["n"], 3);
    assert_eq!(json["method"], "subtracted");
    assert_eq!(json["convention"], "half-period-a");
    let value = json["value"].as_f64().unwrap();
    assert!(
        (value + 1.747_564_594_633_182).abs() < 1e-10,
        "value {value}"
    );
    assert!(json["error_estimate"].as_f64().unwrap() > 0.0);
    assert!(json["eps"].is_null());
}

#[test]
fn madelung_planar_reports_exact_form() {
    let out = run(&["madelung", "--family", "cscl", "--dim", "2"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let value = json["value"].as_f64().unwrap();
    assert!(
        (value + 0.617_385_745_351_564).abs() < 1e-12,
        "value {value}"
    );
    assert_eq!(json["method"], "closed-form-2d");
    assert_eq!(json["exact_form"], "-log(Gamma(1/4)^2 / (4 sqrt(pi)))");
}

#[test]
fn planar_finite_part_is_a_usage_error() {
    let out = run(&[
        "madelung",
        "--family",
        "nacl",
        "--dim",
        "2",
        "--method",
        "epsilon-limit",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("ambiguous"), "stderr: {err}");
}

#[test]
fn conflicting_length_flags_are_rejected() {
    let out = run(&[
        "madelung",
        "--family",
        "nacl",
        "--dim",
        "3",
        "--a",
        "1",
        "--cell-side",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_one_with_diagnostic_json() {
    // The Green function diverges at a lattice point.
    let out = run(&["psi", "--dim", "2", "--a", "1", "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    let json: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(json["schema"], 1);
    assert_eq!(json["kind"], "singularity");
}

#[test]
fn identical_configs_are_byte_identical() {
    for args in [
        vec![
            "madelung",
            "--family",
            "cscl",
            "--dim",
            "3",
            "--cell-side",
            "1",
        ],
        vec!["madelung", "--family", "nacl", "--dim", "2"],
        vec![
            "potential-grid",
            "--family",
            "nacl",
            "--dim",
            "2",
            "--a",
            "1",
            "--resolution",
            "8",
            "--format",
            "csv",
        ],
        vec![
            "partial-sums",
            "--family",
            "nacl",
            "--dim",
            "3",
            "--a",
            "1",
            "--radius-max",
            "12",
        ],
        vec![
            "psi", "--dim", "2", "--a", "1", "--point", "0.3,0.7", "--point", "1,1",
        ],
    ] {
        let first = run(&args);
        let second = run(&args);
        assert!(first.status.success(), "{args:?} failed");
        assert_eq!(
            first.stdout, second.stdout,
            "output of {args:?} not reproducible"
        );
    }
}

#[test]
fn grid_csv_and_json_formats() {
    let out = run(&[
        "potential-grid",
        "--family",
        "cscl",
        "--dim",
        "2",
        "--a",
        "1",
        "--resolution",
        "8",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,V,mask");
    assert_eq!(text.lines().count(), 65); // header + 8^2 samples
    assert_eq!(
        text.lines()
            .filter(|l| l.ends_with("singular-site"))
            .count(),
        2
    );

    let out = run(&[
        "potential-grid",
        "--family",
        "cscl",
        "--dim",
        "2",
        "--a",
        "1",
        "--resolution",
        "8",
        "--format",
        "json",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["schema"], 1);
    assert_eq!(json["resolution"], 8);
    assert_eq!(json["samples"].as_array().unwrap().len(), 64);
}

#[test]
fn partial_sums_csv_shape() {
    let out = run(&[
        "partial-sums",
        "--family",
        "nacl",
        "--dim",
        "3",
        "--a",
        "1",
        "--radius-max",
        "10",
        "--ordering",
        "spheres",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "radius,partial_sum");
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn nearest_neighbour_convention_flag() {
    let out = run(&["madelung", "--family", "cscl", "--dim", "3", "--d-nn", "1"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["convention"], "nearest-neighbour");
    let a = json["a"].as_f64().unwrap();
    assert!((a - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    // Equivalent to the generic convention pair.
    let out2 = run(&[
        "madelung",
        "--family",
        "cscl",
        "--dim",
        "3",
        "--length",
        "1",
        "--convention",
        "nearest-neighbour",
    ]);
    let json2: serde_json::Value = serde_json::from_str(&stdout(&out2)).unwrap();
    assert_eq!(json["value"], json2["value"]);
}

#[test]
fn verify_reports_and_passes() {
    let out = run(&["verify"]);
    assert!(
        out.status.success(),
        "verify failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(json["schema"], 1);
    assert_eq!(json["passed"], true);
    assert!(json["checks"].as_array().unwrap().len() >= 25);
    let progress = String::from_utf8(out.stderr).unwrap();
    assert!(progress.contains("[pass]"));
}
