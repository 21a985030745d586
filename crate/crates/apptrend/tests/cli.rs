use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn apptrend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apptrend")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = apptrend(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) -> String {
    let log = dir.join("usage.jsonl");
    let log = log.to_str().unwrap();
    ok(&[
        "synth", "--hot", "5", "--flop", "5", "--dominant", "5", "--marginal", "5", "--users", "150", "--days", "100",
        "--noise", "0.05", "--seed", "3", "--out", log,
    ]);
    log.to_string()
}

#[test]
fn synth_then_analyses() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth(dir.path());
    let truth = fs::read_to_string(dir.path().join("truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 21);
    assert_eq!(truth.lines().next(), Some("app_id,archetype"));

    let summary = ok(&["ingest", &log]);
    assert!(summary.contains("apps,20"), "{summary}");
    assert!(summary.contains("window_start,2014-01-01"), "{summary}");

    let daily = ok(&["ingest", &log, "--daily", "app-00"]);
    assert!(daily.starts_with("date,users,missing\n2014-01-"), "{daily}");

    let retention = ok(&["retention", &log, "--days", "1,7"]);
    assert!(retention.starts_with("app_id,cohort_size,rate_d1,rate_d7\n"));
    assert_eq!(retention.lines().count(), 21);

    let classes = ok(&["classify", &log]);
    let kinds: Vec<&str> = classes.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    let planted: Vec<&str> = truth.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(kinds.len(), 20);
    let agree = kinds.iter().zip(&planted).filter(|(a, b)| a == b).count();
    assert!(agree >= 18, "{classes}");

    let consensus = ok(&["consensus", &log, "--category", "cat-0", "--relative", "app-00"]);
    assert!(consensus.starts_with("index,value,relative\n"));
    assert_eq!(consensus.lines().count(), 101);

    let clusters = ok(&["kmeans", &log, "--k", "4", "--runs", "3"]);
    assert_eq!(clusters.lines().count(), 5);
    let sizes: usize = clusters.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(sizes, 20);
}

#[test]
fn recommend_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth(dir.path());
    let recs = ok(&["recommend", &log, "--user", "user-000", "--n", "3", "--as-of", "2014-03-01"]);
    let lines: Vec<&str> = recs.lines().collect();
    assert_eq!(lines[0], "rank,app_id,P,trend_kind");
    assert!(lines.len() <= 4);

    let filtered = ok(&["recommend", &log, "--user", "user-000", "--n", "10", "--drop-flops"]);
    assert!(filtered.lines().skip(1).all(|l| !l.ends_with(",flop")));

    let eval = ok(&["evaluate", &log, "--weeks", "2", "--n", "5", "--drop-flops"]);
    let rows: Vec<&str> = eval.lines().collect();
    assert!(rows[0].starts_with("week,rec_hot,rec_flop,"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.split(',').nth(2) == Some("0")));
}

#[test]
fn report_into_directory() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth(dir.path());
    let out = dir.path().join("report");
    let args = ["report", &log, "--out", out.to_str().unwrap(), "--k", "4", "--runs", "2", "--weeks", "2", "--n", "5"];
    ok(&args);
    for f in ["retention.csv", "classification.csv", "categories.csv", "consensus.csv", "evaluation.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let first = fs::read(out.join("evaluation.csv")).unwrap();
    ok(&args);
    assert_eq!(fs::read(out.join("evaluation.csv")).unwrap(), first);
}

#[test]
fn write_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth(dir.path());
    let out = dir.path().join("classes.csv");
    let stdout = ok(&["classify", &log, "--out", out.to_str().unwrap()]);
    assert!(stdout.is_empty());
    assert!(fs::read_to_string(out).unwrap().starts_with("app_id,kind"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = apptrend(&["classify", "/nonexistent/usage.jsonl"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/usage.jsonl"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "user,app,date\nu,a,2014-01-01\nu,a,2014-13-01\n").unwrap();
    let out = apptrend(&["ingest", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3: field `date`"));

    let log = synth(dir.path());
    let cold = apptrend(&["recommend", &log, "--user", "nobody"]);
    assert!(!cold.status.success());
    assert!(!apptrend(&["synth"]).status.success(), "synth needs --out");
    assert!(!apptrend(&["retention", &log, "--window-start", "2014-01-01"]).status.success());
}
