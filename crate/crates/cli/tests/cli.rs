use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FIG1: &str = r#"{"n": 7, "pairs": [
  {"S": [1,2,3,4], "i": 1}, {"S": [1,2,3,5], "i": 1},
  {"S": [4,5,6,7], "i": 4}, {"S": [1,2,6,7], "i": 1}]}"#;

const COPIES: &str = r#"{"n": 6, "pairs": [
  {"S": [1,2,3,4], "i": 1}, {"S": [1,2,3,4], "i": 2}, {"S": [1,2,3,4], "i": 3}]}"#;

fn kapdeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kapdeg"))
        .args(args)
        .env_remove("KAPDEG_CACHE")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).trim_end().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn figure_one_commands() {
    let dir = tempfile::tempdir().unwrap();
    let fig = write(dir.path(), "fig1.json", FIG1);
    let out = kapdeg(&["degree", arg(&fig)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "2");
    assert_eq!(
        stdout(&kapdeg(&["positivity", arg(&fig), "--witness"])),
        "positive (Cerberus holds)"
    );
    assert!(stdout(&kapdeg(&["bound", arg(&fig), "--best"])).starts_with("bound 2 at pqr={"));
    assert_eq!(stdout(&kapdeg(&["oracle-trees", arg(&fig)])), "2");
    assert_eq!(
        stdout(&kapdeg(&["oracle-jacobian", arg(&fig)])),
        "rank 4 of 4 (full)"
    );
    assert_eq!(
        stdout(&kapdeg(&[
            "degree",
            arg(&fig),
            "--seed",
            "9",
            "--no-fast-paths"
        ])),
        "2"
    );
}

#[test]
fn violating_system() {
    let dir = tempfile::tempdir().unwrap();
    let copies = write(dir.path(), "copies.json", COPIES);
    assert_eq!(stdout(&kapdeg(&["degree", arg(&copies)])), "0");
    assert_eq!(
        stdout(&kapdeg(&["positivity", arg(&copies), "--witness"])),
        "zero (Cerberus fails: J={1,2,3})"
    );
    assert_eq!(
        stdout(&kapdeg(&["bound", arg(&copies), "--pqr", "4,5,6"])),
        "bound 6 at pqr={4,5,6}"
    );
    let shrink = kapdeg(&["shrink", arg(&copies)]);
    assert_eq!(shrink.status.code(), Some(2));
}

#[test]
fn json_output_is_one_document() {
    let dir = tempfile::tempdir().unwrap();
    let fig = write(dir.path(), "fig1.json", FIG1);
    let out = kapdeg(&["--json", "degree", arg(&fig)]);
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["command"], "degree");
    assert_eq!(doc["result"]["degree"], "2");
    assert_eq!(doc["input"]["n"], 7);
    assert!(doc["stats"]["memo_misses"].is_u64());
    let witten: Value = serde_json::from_str(&stdout(&kapdeg(&[
        "--json",
        "oracle-witten",
        "2",
        "2",
        "1",
        "0",
        "0",
        "0",
        "0",
        "0",
    ])))
    .unwrap();
    assert_eq!(witten["result"]["value"], "30");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"n\": 5,\n \"pairs\": [}");
    let out = kapdeg(&["degree", arg(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let invalid = write(
        dir.path(),
        "invalid.json",
        r#"{"n": 5, "pairs": [{"S": [1,2,3], "i": 4}]}"#,
    );
    assert_eq!(kapdeg(&["degree", arg(&invalid)]).status.code(), Some(1));

    let fig = write(dir.path(), "fig1.json", FIG1);
    assert_eq!(
        kapdeg(&["oracle-trees", arg(&fig), "--max-n", "6"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        kapdeg(&["positivity", arg(&fig), "--exhaustive-cap", "2"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        stdout(&kapdeg(&[
            "positivity",
            arg(&fig),
            "--exhaustive-cap",
            "2",
            "--matching"
        ])),
        "positive (Cerberus holds)"
    );
    assert_eq!(kapdeg(&["table", "9", "--size4"]).status.code(), Some(3));
    assert_eq!(
        kapdeg(&["oracle-transversals", arg(&fig)]).status.code(),
        Some(1)
    );
}

#[test]
fn transversal_oracle() {
    let dir = tempfile::tempdir().unwrap();
    // Both T = {1, 2} with marked points 3 and 4: the multinomial 2!/(1! 1!).
    let inst = write(
        dir.path(),
        "t.json",
        r#"{"n": 5, "pairs": [{"S": [1,2,3,4,5], "i": 3}, {"S": [1,2,3,4,5], "i": 4}]}"#,
    );
    assert_eq!(stdout(&kapdeg(&["oracle-transversals", arg(&inst)])), "2");
    assert_eq!(
        stdout(&kapdeg(&["degree", arg(&inst), "--no-fast-paths"])),
        "2"
    );
}

#[test]
fn tables() {
    let n4 = stdout(&kapdeg(&["table", "4", "--size4"]));
    assert_eq!(
        n4,
        "system,degree,cerberus,best_bound,best_pqr\n1.2.3.4:1,1,true,1,1.2.3"
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t5.csv");
    assert!(kapdeg(&["table", "5", "--size4", "--out", arg(&path)])
        .status
        .success());
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 15);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert!(cols[1] == "0" || cols[1] == "1", "{row}");
        assert_eq!(cols[1] == "1", cols[2] == "true", "{row}");
    }

    let doc: Value = serde_json::from_str(&stdout(&kapdeg(&[
        "--json",
        "table",
        "6",
        "--size4",
        "--out",
        arg(&dir.path().join("t6.csv")),
    ])))
    .unwrap();
    assert_eq!(doc["result"]["rows"], 680);
}

#[test]
fn cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fig = write(dir.path(), "fig1.json", FIG1);
    let cache = dir.path().join("cache.jsonl");
    let first = kapdeg(&[
        "--cache",
        arg(&cache),
        "--no-fast-paths",
        "degree",
        arg(&fig),
    ]);
    assert_eq!(stdout(&first), "2");
    let text = fs::read_to_string(&cache).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let entry: Value = serde_json::from_str(line).unwrap();
        assert_eq!(entry["v"], 1);
        assert!(entry["deg"].is_string());
    }
    let second = kapdeg(&[
        "--json",
        "--cache",
        arg(&cache),
        "--no-fast-paths",
        "degree",
        arg(&fig),
    ]);
    let doc: Value = serde_json::from_str(&stdout(&second)).unwrap();
    assert_eq!(doc["result"]["degree"], "2");
    assert_eq!(doc["stats"]["memo_misses"], 0);

    fs::write(&cache, "{\"v\":2,\"key\":\"AA==\",\"deg\":\"1\"}\n").unwrap();
    assert_eq!(
        kapdeg(&["--cache", arg(&cache), "degree", arg(&fig)])
            .status
            .code(),
        Some(1)
    );
    let bypass = kapdeg(&[
        "--cache",
        arg(&cache),
        "--no-cache",
        "selftest",
        "--criterion",
        "1",
    ]);
    assert!(bypass.status.success());
}

#[test]
fn single_thread_output_matches() {
    let dir = tempfile::tempdir().unwrap();
    let fig = write(dir.path(), "fig1.json", FIG1);
    let a = kapdeg(&["--json", "--threads", "1", "bound", arg(&fig), "--best"]);
    let b = kapdeg(&["--json", "bound", arg(&fig), "--best"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn selftest_subset() {
    let out = kapdeg(&["selftest", "--criterion", "1", "--criterion", "7"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert_eq!(
        kapdeg(&["selftest", "--criterion", "13"]).status.code(),
        Some(1)
    );
}
