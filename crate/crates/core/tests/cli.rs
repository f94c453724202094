use std::path::Path;
use std::process::{Command, Output};

use macphail_lab::cli::report::Report;

fn exe() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_macphail-lab"));
    cmd.env_remove("MACPHAIL_LAB_OUT");
    cmd
}

fn run(args: &[&str]) -> Output {
    exe().args(args).output().unwrap()
}

fn report(out: &Output) -> Report {
    Report::parse(&out.stdout).unwrap()
}

fn column<'a>(report: &'a Report, table: &str, name: &str) -> Vec<&'a str> {
    let t = report.table(table).unwrap();
    let i = t.columns.iter().position(|c| c == name).unwrap();
    t.rows.iter().map(|r| r[i].as_str()).collect()
}

#[test]
fn construct_block_structure() {
    let out = run(&["construct", "--alpha", "2", "--p", "1", "--k-max", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.starts_with("# macphail-lab v1 construct\n"));
    let rep = report(&out);
    let j = column(&rep, "terms", "j");
    assert_eq!(j, ["1", "2", "3", "4", "5", "6", "7"]);
    let norms = column(&rep, "terms", "norm");
    let nonzero: Vec<&str> = j.iter().zip(&norms).filter(|(_, n)| **n != "0").map(|(j, _)| *j).collect();
    assert_eq!(nonzero, ["1", "4", "5", "6", "7"]);
    assert_eq!(norms[1], "0");
    assert_eq!(norms[3], "2.5000000000000000e-1");
}

#[test]
fn construct_rejects_real_walsh_with_alpha_three() {
    let out = run(&["construct", "--construction", "real-walsh", "--alpha", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn construct_budget_and_summary() {
    let out = run(&["construct", "--k-max", "6"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["construct", "--k-max", "40", "--summary"]);
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(column(&rep, "blocks", "norm_log")[39], "-8.1900000000000000e2");
    let out = run(&["construct", "--k-max", "4", "--coefficients"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_arguments_are_config_errors() {
    assert_eq!(run(&["diverge", "--r", "2.5"]).status.code(), Some(2));
    assert_eq!(run(&["diverge", "--p", "3"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--delta", "0"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_detects_fault() {
    let out = run(&["verify", "--trials", "100", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert_eq!(rep.meta_value("status"), Some("pass"));
    let kernels = column(&rep, "orthogonality", "kernel");
    let devs = column(&rep, "orthogonality", "max_deviation");
    for (k, d) in kernels.iter().zip(&devs) {
        if *k == "walsh" {
            assert_eq!(*d, "0");
        }
    }
    let out = run(&["verify", "--trials", "10", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(1));
    let rep = report(&out);
    assert_eq!(rep.meta_value("status"), Some("fail"));
    let failures = rep.table("failures").unwrap();
    assert_eq!(failures.rows.len(), 1);
    assert!(failures.rows[0][1].starts_with("walsh 8 "));
}

#[test]
fn diverge_reports_first_growing_block() {
    let rep = report(&run(&["diverge", "--r", "1.9", "--k-max", "40"]));
    assert_eq!(rep.meta_value("k0"), Some("39"));
    let rep = report(&run(&["diverge", "--r", "1", "--threshold", "1e6"]));
    let certified: f64 = rep.meta_value("witness_certified_log_lower").unwrap().parse().unwrap();
    assert!(certified > 1e6f64.log2());
    let rep = report(&run(&["diverge", "--r", "2", "--k-max", "5"]));
    assert_eq!(column(&rep, "terms", "term_log"), ["0", "-2.0000000000000000e0", "-4.0000000000000000e0", "-6.0000000000000000e0", "-8.0000000000000000e0"]);
}

#[test]
fn macphail_curve_and_import() {
    let rep = report(&run(&["macphail", "--k-max", "4", "--trials", "8"]));
    assert_eq!(
        column(&rep, "curve", "analytic_bound"),
        ["1.0000000000000000e0", "5.0000000000000000e-1", "1.2500000000000000e-1", "1.5625000000000000e-2"]
    );
    assert_eq!(column(&rep, "curve", "method"), ["exact", "exact", "randomized", "randomized"]);

    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.json");
    std::fs::write(&seq, r#"{"p":1,"vectors":[[[1,"1"]],[[1,"-1"]]]}"#).unwrap();
    let out = run(&["macphail", "--input", seq.to_str().unwrap()]);
    assert!(out.status.success());
    let rep = report(&out);
    assert_eq!(column(&rep, "g", "value"), ["5.0000000000000000e-1"]);
    assert_eq!(column(&rep, "g", "method"), ["exhaustive"]);

    std::fs::write(&seq, r#"{"p":1,"vectors":[[[1,"0"]]]}"#).unwrap();
    assert_eq!(run(&["macphail", "--input", seq.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["macphail", "--input", missing.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"r":"1.5","k-max":3,"format":"json"}"#).unwrap();
    let rep = report(&run(&["diverge", "--config", cfg.to_str().unwrap()]));
    assert_eq!(rep.meta_value("r"), Some("1.5"));
    assert_eq!(rep.table("terms").unwrap().rows.len(), 3);
    let rep = report(&run(&["diverge", "--config", cfg.to_str().unwrap(), "--r", "1.9"]));
    assert_eq!(rep.meta_value("r"), Some("1.9"));
    std::fs::write(&cfg, r#"{"unknown":1}"#).unwrap();
    assert_eq!(run(&["diverge", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = exe()
        .args(["diverge", "--k-max", "3"])
        .env("MACPHAIL_LAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read(dir.path().join("diverge.csv")).unwrap();
    assert!(written.starts_with(b"# macphail-lab v1 diverge\n"));
}

fn run_to(args: &[&str], path: &Path) {
    let status = exe().args(args).arg("--output").arg(path).status().unwrap();
    assert!(status.success());
}

#[test]
fn export_round_trips_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let json = dir.path().join("curve.json");
    let back = dir.path().join("back.csv");
    run_to(&["macphail", "--k-max", "3", "--trials", "4"], &csv);
    let csv_s = csv.to_str().unwrap();
    run_to(&["export", "--input", csv_s, "--format", "json"], &json);
    run_to(&["export", "--input", json.to_str().unwrap(), "--format", "csv"], &back);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&back).unwrap());
    let garbage = dir.path().join("garbage.csv");
    std::fs::write(&garbage, "not a report").unwrap();
    assert_eq!(run(&["export", "--input", garbage.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["verify", "--trials", "50", "--seed", "123", "--k-max", "3"];
    run_to(&args, &a);
    run_to(&args, &b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
