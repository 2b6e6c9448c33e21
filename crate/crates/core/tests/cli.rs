//! Exit codes and outputs of the `clane` binary.

use std::process::{Command, Output};

fn clane(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clane")).args(args).output().unwrap()
}

#[test]
fn missing_feature_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").display().to_string();
    let o = clane(&["learn", "--features", "/nonexistent/x.feat", "--out-dir", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(clane(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(clane(&["lut-dump", "--bogus"]).status.code(), Some(2));
    assert_eq!(clane(&["lut-dump", "--set", "norm.lut_bits=99"]).status.code(), Some(2));
    assert_eq!(clane(&["bench", "--windows", "0ms"]).status.code(), Some(2));
}

#[test]
fn bench_reports_three_rows() {
    let o = clane(&["bench", "--windows", "40ms,10ms,2ms"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let timesteps: Vec<u64> = text
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(timesteps, vec![10, 40, 200]);
}

#[test]
fn lut_dump_lists_every_entry() {
    let o = clane(&["lut-dump", "--set", "norm.lut_bits=6"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 65);
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["forgetting.toml", "holdout.toml"] {
        clane::harness::Config::load(Some(&dir.join(name)), &[]).unwrap();
    }
}
