use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use svmtune_bench::stability::StabilityReport;
use svmtune_bench::synthetic::{blobs, separation_for, write_csv};

fn svmtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svmtune")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A config with two small blob datasets in a fresh directory.
fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in ["a", "b"].iter().enumerate() {
        write_csv(&blobs(30, 4, separation_for(0.9), 70 + i as u64), dir.path().join(format!("{name}.csv"))).unwrap();
    }
    let cfg = format!(
        r#"{{
            "datasets": [{{"id": "a", "path": "a.csv"}}, {{"id": "b", "path": "b.csv"}}],
            "algorithms": ["grid100", "grid25"],
            "seeds": {{"split": 1, "search": 2, "bootstrap": 3{extra}}},
            "output_dir": "out",
            "bootstrap_replicates": 200
        }}"#
    );
    let path = dir.path().join("run.json");
    std::fs::write(&path, cfg).unwrap();
    (dir, path)
}

fn without_time(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn tune_reports_the_budget() {
    let (dir, cfg) = setup("");
    let o = svmtune(&["tune", "--config", cfg.to_str().unwrap(), "--algorithm", "grid25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("evaluations: 25"), "{}", stdout(&o));
    let log = std::fs::read_to_string(dir.path().join("out/eval_log_a_grid25.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 25);
}

#[test]
fn tune_skl1_uses_the_default_pair() {
    let (_dir, cfg) = setup("");
    let o = svmtune(&["tune", "--config", cfg.to_str().unwrap(), "--algorithm", "skl1", "--dataset", "b"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "C: 1"), "{text}");
    assert!(text.lines().any(|l| l == "gamma: 0.25"), "{text}");
    assert!(text.contains("evaluations: 1"));
}

#[test]
fn unknown_algorithm_lists_the_registry() {
    let (_dir, cfg) = setup("");
    let o = svmtune(&["tune", "--config", cfg.to_str().unwrap(), "--algorithm", "grid26"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("grid26") && err.contains("udhier200") && err.contains("asymp40"), "{err}");
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let (dir, cfg) = setup("");
    assert_eq!(svmtune(&["tune", "--bogus"]).status.code(), Some(1));
    assert_eq!(svmtune(&["report", "--config", "/nonexistent/run.json"]).status.code(), Some(1));
    std::fs::remove_file(dir.path().join("a.csv")).unwrap();
    let o = svmtune(&["tune", "--config", cfg.to_str().unwrap(), "--algorithm", "grid25"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn benchmark_is_resumable_and_deterministic() {
    let (dir, cfg) = setup("");
    let cfg = cfg.to_str().unwrap();
    let first = svmtune(&["benchmark", "--config", cfg]);
    assert!(first.status.success(), "{}", stderr(&first));
    let table = dir.path().join("out/gain_table.csv");
    let original = without_time(&table);
    assert_eq!(original.len(), 1 + 2 * 2, "{original:?}");
    assert!(original.iter().any(|l| l == "grid100,a,0.0,0.0,1.0"), "{original:?}");

    // nothing left to do
    let again = svmtune(&["benchmark", "--config", cfg]);
    assert!(stdout(&again).contains("trials run: 0"), "{}", stdout(&again));
    assert_eq!(without_time(&table), original);

    // an interrupted run: drop the last record and leave a torn line
    let records = dir.path().join("out/records.jsonl");
    let text = std::fs::read_to_string(&records).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&records, format!("{}\n{{\"algorithm\":", lines.join("\n"))).unwrap();
    let resumed = svmtune(&["benchmark", "--config", cfg]);
    assert!(stdout(&resumed).contains("trials run: 1"), "{}", stdout(&resumed));
    assert_eq!(without_time(&table), original);

    // a fresh directory reproduces the table
    let fresh = dir.path().join("fresh");
    let o = svmtune(&["benchmark", "--config", cfg, "--output-dir", fresh.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success());
    assert_eq!(without_time(&fresh.join("gain_table.csv")), original);

    // report re-aggregates without running anything
    std::fs::remove_file(&table).unwrap();
    let r = svmtune(&["report", "--config", cfg]);
    assert!(r.status.success(), "{}", stderr(&r));
    assert_eq!(without_time(&table), original);
    let ci = std::fs::read_to_string(dir.path().join("out/gain_ci.csv")).unwrap();
    assert!(ci.lines().any(|l| l.starts_with("grid100,2,0,0,0,")), "{ci}");
}

#[test]
fn stability_report_round_trips() {
    let (dir, cfg) = setup(r#", "stability": [5, 5]"#);
    let cfg = cfg.to_str().unwrap();
    let o = svmtune(&["stability", "--config", cfg, "--algorithm", "grid25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = dir.path().join("out/stability_grid25.csv");
    let report = StabilityReport::read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(report.same_best_proportion, 1.0);
    assert_eq!(report.mean_log_distance, 0.0);
    let rows = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.contains("datasets_used")).count(), 1 + 6);

    let adaptive = svmtune(&["stability", "--config", cfg, "--algorithm", "nelder25", "--seed-pair", "1", "2"]);
    assert_eq!(adaptive.status.code(), Some(1));
    assert!(stderr(&adaptive).contains("stability requires predetermined probes"));
}
