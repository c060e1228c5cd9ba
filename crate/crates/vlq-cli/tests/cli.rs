//! End-to-end tests of the `vlq` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn vlq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vlq-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const HEADER: &str = "mode,t,rho,P,alpha,ell_max,n_samples,out_hat,out_se,closed_full,closed_open,rate_bstar_hat,rate_prefix_hat,rate_se,truncation_frac,mean_index,seed";

#[test]
fn simulate_emits_schema_csv() {
    let out = vlq(&["simulate", "--t", "2", "--p", "10", "--samples", "2000", "--seed", "3"]);
    assert!(out.status.success());
    let body = stdout(&out);
    let mut lines = body.lines();
    assert_eq!(lines.next().unwrap(), HEADER);
    let row = lines.next().unwrap();
    assert_eq!(row.split(',').count(), 17);
    assert!(row.starts_with("vlq,2,1,10,0.1,4,2000,"));
    assert!(lines.next().is_none());
}

#[test]
fn sweep_emits_one_row_per_grid_point() {
    let out = vlq(&[
        "sweep", "--t", "2", "--rho", "1", "--p-grid", "10,20,50,100", "--samples", "1000",
        "--ell-max", "3",
    ]);
    assert!(out.status.success());
    let body = stdout(&out);
    assert_eq!(body.lines().count(), 5);
    for (line, p) in body.lines().skip(1).zip(["10", "20", "50", "100"]) {
        assert!(line.starts_with(&format!("vlq,2,1,{p},")), "{line}");
    }
}

#[test]
fn missing_t_is_a_usage_error() {
    let out = vlq(&["simulate", "--p", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("--t"), "{err}");
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "sweep", "--t", "2", "--p-grid", "10,20", "--samples", "5000", "--seed", "11",
        "--ell-max", "3",
    ];
    let a = vlq(&args);
    let b = vlq(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    // shard count must not change the bytes either
    let mut with_shards = args.to_vec();
    with_shards.extend(["--shards", "16"]);
    let c = vlq(&with_shards);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn json_format_mirrors_field_names() {
    let out = vlq(&[
        "simulate", "--t", "1", "--p", "10", "--samples", "500", "--format", "json",
        "--ell-max", "2",
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let row = &parsed.as_array().unwrap()[0];
    for field in HEADER.split(',') {
        assert!(row.get(field).is_some(), "missing field {field}");
    }
}

#[test]
fn config_file_merges_with_flag_priority() {
    let dir = temp_dir("config");
    let conf = dir.join("run.conf");
    std::fs::write(&conf, "t = 1\np = 10\nsamples = 400\nell-max = 2\n").unwrap();
    let out = vlq(&["simulate", "--config", conf.to_str().unwrap(), "--samples", "250"]);
    assert!(out.status.success());
    let body = stdout(&out);
    // flag wins over config for samples; config supplies t and p
    assert!(body.lines().nth(1).unwrap().starts_with("vlq,1,1,10,0.1,2,250,"), "{body}");
}

#[test]
fn out_file_gets_a_manifest() {
    let dir = temp_dir("manifest");
    let out_path = dir.join("rows.csv");
    let out = vlq(&[
        "simulate", "--t", "1", "--p", "5", "--samples", "300", "--ell-max", "1",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let body = std::fs::read_to_string(&out_path).unwrap();
    assert!(body.starts_with(HEADER));
    let manifest_path = dir.join("rows.csv.manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["effective_config"]["samples"], 300);
    assert_eq!(manifest["effective_config"]["t"], 1);
}

#[test]
fn codebook_export_matches_schema() {
    let out = vlq(&["codebook", "--t", "1", "--ell-max", "1"]);
    assert!(out.status.success());
    let body = stdout(&out);
    assert!(body.starts_with("index,layer,c0,c1\n"));
    assert_eq!(body.lines().count(), 1 + 32); // header + |Y_1| at t=1
}

#[test]
fn toy_emits_bracket_table() {
    let out = vlq(&["toy", "--n-trunc", "10000"]);
    assert!(out.status.success());
    let body = stdout(&out);
    assert!(body.starts_with("quantity,n,lower,upper\n"));
    assert!(body.contains("kraft_prefix_free,"));
    assert!(body.contains("vlq_rate,10000,"));
    assert!(body.contains("flq_distortion,1000000,"));
}

#[test]
fn verify_reports_all_checks_passing() {
    let out = vlq(&["verify", "--t", "1", "--samples", "20000", "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["all_pass"], true);
    assert!(parsed["checks"].as_array().unwrap().len() >= 10);
}

#[test]
fn bad_inputs_fail_with_diagnostics() {
    let out = vlq(&["simulate", "--t", "2", "--p", "10", "--mode", "banana", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown mode"));

    let out = vlq(&["simulate", "--t", "2", "--p-grid", "10,20", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one"));

    let out = vlq(&["sweep", "--t", "2", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("power"));
}
