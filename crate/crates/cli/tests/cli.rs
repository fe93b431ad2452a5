use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bpre_core::{CoverageReport, VerificationReport};
use tempfile::TempDir;

const M1: &str = r#"
schema_version = 1
[environment]
states = [[[1, 0.5], [2, 0.5]], [[2, 0.6], [3, 0.4]]]
weights = [0.5, 0.5]
"#;

fn bpre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpre"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_with(dir: &TempDir, subcommand: &str, manifest: &str, extra: &[&str]) -> Output {
    let config = dir.path().join("config.toml");
    fs::write(&config, manifest).unwrap();
    let out = dir.path().join("out");
    let mut args = vec![
        subcommand,
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    bpre(&args)
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn error_code(output: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&output.stderr).expect("JSON envelope");
    assert_eq!(v["schema_version"], 1);
    v["error"]["code"].as_str().unwrap().to_string()
}

#[test]
fn zero_offspring_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let manifest = M1.replace("[[1, 0.5], [2, 0.5]]", "[[0, 0.5], [2, 0.5]]");
    let output = run_with(&dir, "bounds", &manifest, &[]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(error_code(&output), "ZERO_OFFSPRING");
}

#[test]
fn malformed_manifest_is_reported() {
    let dir = TempDir::new().unwrap();
    let output = run_with(&dir, "bounds", "schema_version = 1\n[environment]\n", &[]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(error_code(&output), "CONFIG_PARSE");
}

#[test]
fn degenerate_environment_is_rejected_by_verify() {
    let dir = TempDir::new().unwrap();
    let manifest = "schema_version = 1\n[environment]\nstates = [[[1, 0.25], [2, 0.5], [3, 0.25]]]\nweights = [1.0]\n";
    let output = run_with(&dir, "verify", manifest, &["--replicas", "10"]);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(error_code(&output), "DEGENERATE");
}

#[test]
fn bernstein_at_zero_is_two() {
    let dir = TempDir::new().unwrap();
    let manifest = format!(
        "{M1}\n[run]\nn = [10]\ntheorems = [\"bernstein\"]\n[x_grids]\nbernstein = [0.0]\n"
    );
    let output = run_with(&dir, "bounds", &manifest, &[]);
    assert!(output.status.success());
    let text = fs::read_to_string(dir.path().join("out/bounds.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1], "0,2,1,2,,bernstein,standardized,10");
}

#[test]
fn csv_headers_are_stable() {
    let dir = TempDir::new().unwrap();
    let manifest = format!(
        "{M1}\n[run]\nn0 = [0]\nn = [2]\nreplicas = 200\ntheorems = [\"rio\"]\nsimulate_replicas = 2\ngenerations = 3\n"
    );
    for sub in ["simulate", "bounds", "verify", "enumerate", "diagnose"] {
        let output = run_with(&dir, sub, &manifest, &[]);
        assert!(
            output.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let out = dir.path().join("out");
    assert_eq!(
        header(&out.join("trajectories.csv")),
        "replica,k,z,ln_z,s,ln_w,env_idx,approx"
    );
    assert_eq!(
        header(&out.join("bounds.csv")),
        "x,raw_value,clamped_value,component_1,component_2,theorem_id,scale,n"
    );
    assert_eq!(
        header(&out.join("verify.csv")),
        "theorem_id,scale,n0,n,x,p_hat,std_err,replicas,exact_replicas,exact_p_hat,bound_raw,bound_clamped,pass,hypothesis_violated"
    );
    assert_eq!(
        header(&out.join("enumerate.csv")),
        "n0,n,scale,x,prob,truncated_mass,prob_upper"
    );
    assert_eq!(
        header(&out.join("diagnose.csv")),
        "n,x,p_hat,std_err,normal_tail,ratio"
    );
}

#[test]
fn reports_round_trip_and_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let manifest = format!(
        "{M1}\n[run]\nn0 = [0, 1]\nn = [4, 16]\nreplicas = 2000\ncoverage_replicas = 500\nestimators = [\"mu_bernstein\"]\ndelta = [0.1]\n"
    );
    assert!(run_with(&dir, "verify", &manifest, &[]).status.success());
    let out = dir.path().join("out");
    let first = fs::read(out.join("verify.json")).unwrap();
    let first_csv = fs::read(out.join("verify.csv")).unwrap();
    let reports: Vec<VerificationReport> = serde_json::from_slice(&first).unwrap();
    assert_eq!(reports.len(), 8);
    assert_eq!(
        serde_json::to_vec_pretty(&reports).unwrap(),
        first[..first.len() - 1]
    );

    assert!(run_with(&dir, "verify", &manifest, &[]).status.success());
    assert_eq!(fs::read(out.join("verify.json")).unwrap(), first);
    assert_eq!(fs::read(out.join("verify.csv")).unwrap(), first_csv);

    assert!(run_with(&dir, "ci-coverage", &manifest, &[])
        .status
        .success());
    let coverage: Vec<CoverageReport> =
        serde_json::from_slice(&fs::read(out.join("coverage.json")).unwrap()).unwrap();
    assert_eq!(coverage.len(), 2);
    assert!(coverage.iter().all(|c| c.pass));
}

#[test]
fn undersized_range_fails_verification() {
    let dir = TempDir::new().unwrap();
    let manifest = format!(
        "{M1}\n[moments]\nrange = 0.03\n[run]\nn0 = [0]\nn = [10000]\nreplicas = 300\ntheorems = [\"azuma_hoeffding\"]\n[x_grids]\nazuma_hoeffding = [0.0009]\n"
    );
    let output = run_with(&dir, "verify", &manifest, &[]);
    assert_eq!(output.status.code(), Some(2));
    let reports: Vec<VerificationReport> =
        serde_json::from_slice(&fs::read(dir.path().join("out/verify.json")).unwrap()).unwrap();
    assert!(!reports[0].all_pass());
    assert!(!reports[0].hypothesis_violations.is_empty());
}

#[test]
fn seed_flag_changes_the_sample() {
    let dir = TempDir::new().unwrap();
    let manifest = format!("{M1}\n[run]\nsimulate_replicas = 3\ngenerations = 8\n");
    run_with(&dir, "simulate", &manifest, &["--seed", "1"]);
    let a = fs::read(dir.path().join("out/trajectories.csv")).unwrap();
    run_with(&dir, "simulate", &manifest, &["--seed", "2"]);
    let b = fs::read(dir.path().join("out/trajectories.csv")).unwrap();
    assert_ne!(a, b);
}
