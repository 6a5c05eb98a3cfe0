use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn logcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logcast"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = logcast(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for cmd in [
        "preprocess", "pairs", "train", "predict", "evaluate", "baseline", "synth", "autocorr", "search", "pipeline",
    ] {
        assert!(help.contains(cmd), "{cmd}");
        ok(dir.path(), &[cmd, "--help"]);
    }
}

#[test]
fn preprocess_orders_and_splits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("raw.csv"),
        "case,ts,act\n\
         1,2021-01-01T00:00:02Z,c\n\
         2,2021-01-01T00:00:01Z,a\n\
         1,2021-01-01T00:00:00Z,a\n\
         1,2021-01-01T00:00:01Z,b\n\
         2,2021-01-01T00:00:02Z,b\n\
         2,2021-01-01T00:00:03Z,b\n\
         2,2021-01-01T00:00:04Z,d\n",
    )
    .unwrap();
    let stats = ok(
        d,
        &[
            "preprocess", "--input", "raw.csv", "--output", "log.txt", "--case-col", "case", "--time-col", "ts",
            "--act-col", "act", "--stats", "--train-out", "train.txt", "--test-out", "test.txt",
            "--train-fraction", "0.5",
        ],
    );
    assert_eq!(fs::read_to_string(d.join("log.txt")).unwrap(), "a b c\na b b d\n");
    assert_eq!(fs::read_to_string(d.join("train.txt")).unwrap(), "a b c\n");
    assert_eq!(fs::read_to_string(d.join("test.txt")).unwrap(), "a b b d\n");
    assert!(stats.contains("\"cases\": 2"), "{stats}");
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--family", "skip", "--season", "2", "--total", "24", "--out", "all.txt"]);
    let all = fs::read_to_string(d.join("all.txt")).unwrap();
    assert_eq!(all.lines().count(), 24);
    let lines: Vec<&str> = all.lines().collect();
    fs::write(d.join("train.txt"), lines[..20].join("\n") + "\n").unwrap();
    fs::write(d.join("test.txt"), lines[20..].join("\n") + "\n").unwrap();

    let msg = ok(
        d,
        &["pairs", "--log", "train.txt", "--in-traces", "4", "--out-traces", "2", "--vocab", "vocab.json", "--out", "pairs.bin"],
    );
    assert!(msg.starts_with("15 pairs"), "{msg}");
    ok(
        d,
        &[
            "train", "--pairs", "pairs.bin", "--vocab", "vocab.json", "--hidden", "16", "--max-epochs", "3", "--seed",
            "2", "--out", "model.ckpt", "--train-log", "trainlog.csv",
        ],
    );
    let trainlog = fs::read_to_string(d.join("trainlog.csv")).unwrap();
    assert_eq!(trainlog.lines().count(), 4);
    assert!(trainlog.starts_with("epoch,loss,seconds\n"));

    ok(d, &["predict", "--model", "model.ckpt", "--train", "train.txt", "--horizon", "4", "--out", "pred.txt"]);
    let pred = fs::read_to_string(d.join("pred.txt")).unwrap();
    assert!(pred.lines().count() <= 4);

    let eval = ok(d, &["evaluate", "--predicted", "test.txt", "--truth", "test.txt", "--matrices", "m"]);
    let v: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(v["rmse"], 0.0);
    assert_eq!(v["mae"], 0.0);
    assert!(d.join("m/truth.csv").exists());

    let table = ok(
        d,
        &["baseline", "--method", "weighted", "--train", "train.txt", "--truth", "test.txt", "--runs", "10", "--seed", "3", "--json", "b.json"],
    );
    assert!(table.contains("WeightedProb"));
    let score: serde_json::Value = serde_json::from_slice(&fs::read(d.join("b.json")).unwrap()).unwrap();
    assert_eq!(score["runs"], 10);
}

#[test]
fn autocorr_pair_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--family", "parallel", "--season", "3", "--total", "120", "--out", "log.txt"]);
    ok(
        d,
        &["autocorr", "--log", "log.txt", "--from", "a", "--to", "b", "--window", "10", "--max-lag", "12", "--out", "r.csv", "--series-out", "s.csv"],
    );
    let r = fs::read_to_string(d.join("r.csv")).unwrap();
    assert_eq!(r.lines().count(), 14);
    let lag6: f64 = r.lines().nth(7).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((lag6 - 1.0).abs() < 1e-9, "{r}");
    assert_eq!(fs::read_to_string(d.join("s.csv")).unwrap().lines().count(), 1 + 120 - 10 + 1);
    ok(d, &["autocorr", "--log", "log.txt", "--window", "10", "--max-lag", "3", "--out", "all.csv"]);
    assert_eq!(fs::read_to_string(d.join("all.csv")).unwrap().lines().count(), 17);
}

#[test]
fn pipeline_and_search_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--family", "shortloop", "--season", "2", "--total", "40", "--out", "log.txt"]);
    let table = ok(
        d,
        &["pipeline", "--log", "log.txt", "--hidden", "16", "--max-epochs", "2", "--runs", "5", "--out-dir", "run"],
    );
    let rows: Vec<&str> = table.lines().skip(2).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(rows, ["HighestFreq", "RandomPred", "WeightedProb", "PELP"]);
    assert!(d.join("run/manifest.json").exists());
    assert!(d.join("run/report.json").exists());

    ok(
        d,
        &["search", "--strategy", "random", "--trials", "2", "--seed", "4", "--budget-epochs", "1", "--log", "log.txt", "--report", "s.csv", "--max-hidden", "20", "--max-window", "2"],
    );
    assert_eq!(fs::read_to_string(d.join("s.csv")).unwrap().lines().count(), 3);
    ok(
        d,
        &["search", "--strategy", "grid", "--budget-epochs", "1", "--log", "log.txt", "--report", "g.csv", "--lr", "0.01,0.1", "--hidden", "16", "--window", "1:1,2:1"],
    );
    assert_eq!(fs::read_to_string(d.join("g.csv")).unwrap().lines().count(), 5);
}

#[test]
fn failure_classes_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| logcast(d, args).status.code().unwrap();

    assert_eq!(code(&["synth", "--family", "nope", "--season", "2", "--total", "8", "--out", "x.txt"]), 3);
    assert_eq!(code(&["evaluate", "--predicted", "missing.txt", "--truth", "missing.txt"]), 4);
    fs::write(d.join("bad.txt"), "a b\n\nc\n").unwrap();
    assert_eq!(code(&["evaluate", "--predicted", "bad.txt", "--truth", "bad.txt"]), 5);
    assert_eq!(code(&["synth", "--season"]), 2);
    fs::write(d.join("raw.csv"), "case:concept:name,time:timestamp,concept:name\n1,notatime,a\n").unwrap();
    assert_eq!(code(&["preprocess", "--input", "raw.csv", "--output", "o.txt"]), 5);
}
