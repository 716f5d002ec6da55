use std::fs;
use std::path::Path;

use clap::Parser;
use sharecut::cli::{main_with, run_cli, Cli, Outcome, DATA_FILE, METRICS_FILE, METRICS_JSON, RESULTS_FILE};
use sharecut::executor::METRICS_HEADER;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/small.wl");

fn invoke(out: &Path, workload: &str, args: &[&str]) -> Outcome {
    let mut argv = vec![
        "sharecut".to_string(),
        "--workload".into(),
        workload.into(),
        "--out".into(),
        out.display().to_string(),
        "--psmin".into(),
        "4000".into(),
        "--sample-rate".into(),
        "0.2".into(),
        "--block-min".into(),
        "128".into(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    run_cli(&Cli::try_parse_from(argv).expect("valid arguments"))
}

#[test]
fn generate_tune_run_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let g = invoke(out, FIXTURE, &["generate", "--seed", "3"]);
    assert_eq!(g.code, 0, "{}", g.stderr);
    assert!(out.join(DATA_FILE).exists());

    let t = invoke(out, FIXTURE, &["tune", "--budget", "50%"]);
    assert_eq!(t.code, 0, "{}", t.stderr);
    assert!(t.stdout.starts_with("partitions="), "{}", t.stdout);

    let r = invoke(out, FIXTURE, &["run"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.is_empty(), "{}", r.stderr);
    let csv = fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    assert!(csv.starts_with(METRICS_HEADER));
    // header, column names and one row per runtime batch
    assert_eq!(csv.lines().count(), 2 + 3);
    assert!(out.join(METRICS_JSON).exists());
    let results = fs::read_to_string(out.join(RESULTS_FILE)).unwrap();
    assert!(results.starts_with("batch,query,name,group,sum"));

    let o = invoke(out, FIXTURE, &["oracle"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(o.stdout.matches("mismatched=0").count(), 3, "{}", o.stdout);
}

#[test]
fn run_without_artifacts_warns_and_still_answers() {
    let dir = tempfile::tempdir().unwrap();
    let r = invoke(dir.path(), FIXTURE, &["run", "--no-skip"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("no tuning artifacts"), "{}", r.stderr);
    assert!(dir.path().join(RESULTS_FILE).exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(main_with(["sharecut", "run", "--bogus"]), 2);
    assert_eq!(main_with(["sharecut", "tune", "--budget=-5"]), 2);
    assert_eq!(main_with(["sharecut", "run", "--no-reuse", "--naive-reuse"]), 2);
}

#[test]
fn config_and_parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run_cli(&Cli::try_parse_from(["sharecut", "run", "--out", dir.path().to_str().unwrap()]).unwrap());
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.contains("--workload"), "{}", missing.stderr);

    let bad = dir.path().join("bad.wl");
    fs::write(&bad, "schema\n  fact f rows=10\n  bogus line\nend\n").unwrap();
    let o = invoke(dir.path(), bad.to_str().unwrap(), &["run"]);
    assert_eq!(o.code, 2, "{}", o.stderr);
    assert!(o.stderr.contains("line 3"), "{}", o.stderr);

    let o = invoke(dir.path(), FIXTURE, &["run", "--sample-rate", "0"]);
    assert_eq!(o.code, 2, "{}", o.stderr);
}

#[test]
fn corrupt_snapshot_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(DATA_FILE), b"not a snapshot").unwrap();
    let o = invoke(dir.path(), FIXTURE, &["run"]);
    assert_eq!(o.code, 3, "{}", o.stderr);
}
