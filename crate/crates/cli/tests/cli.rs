use std::path::Path;
use std::process::{Command, Output};

fn splitgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitgame")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn play_with_trace(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["play-finite", "--trace", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    splitgame(&args)
}

#[test]
fn passive_game_is_won_at_the_first_funded_leaf() {
    let out = splitgame(&["play-finite", "--h", "3", "--adversary", "passive"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("M wins at leaf 001 (label 1)"), "{}", stdout(&out));
}

#[test]
fn case_b_game_ends_under_the_right_subtree() {
    let out = splitgame(&["play-finite", "--h", "7", "--adversary", "case-b", "--delta", "1/8"]);
    assert_eq!(code(&out), 0);
    let s = stdout(&out);
    assert!(s.contains("M wins at leaf 1") && s.contains("(label 2)"), "{s}");
}

#[test]
fn case_a_and_random_games_are_won() {
    for args in [
        vec!["play-finite", "--h", "5", "--adversary", "case-a", "--target", "2", "--role", "t0"],
        vec!["play-finite", "--h", "5", "--adversary", "random", "--seed", "4", "--runs", "8", "--jobs", "4"],
    ] {
        let out = splitgame(&args);
        assert_eq!(code(&out), 0, "{}", stdout(&out));
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&splitgame(&["play-finite", "--h", "4"])), 2);
    assert_eq!(code(&splitgame(&["play-finite", "--h", "3", "--delta", "0"])), 2);
    assert_eq!(code(&splitgame(&["compose", "--initial-h", "2"])), 2);
    assert_eq!(code(&splitgame(&["pattern-seq", "--n", "0"])), 2);
    assert_eq!(code(&splitgame(&["no-such-command"])), 2);
}

#[test]
fn compose_reports() {
    let out = splitgame(&["compose", "--stages", "0"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("stage heights: []"));
    let out = splitgame(&["compose", "--stages", "3", "--adversary", "case-b", "--delta", "1/64"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("labels: [2, 2, 2]"), "{}", stdout(&out));
    let out = splitgame(&["compose", "--stages", "4", "--adversary", "random", "--runs", "4", "--jobs", "2"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn decompose_checks_hold() {
    let out = splitgame(&["decompose", "--example"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("00\t2/1\t4/3\t3/2"), "{}", stdout(&out));
    let out = splitgame(&["decompose", "--depth", "6", "--seed", "7", "--runs", "5"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).matches("product identity ok").count(), 5);
}

#[test]
fn pattern_sequence_prefix() {
    let out = splitgame(&["pattern-seq", "--n", "8"]);
    assert_eq!(stdout(&out).trim(), "01000101");
}

#[test]
fn traces_verify_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("game.jsonl");
    assert_eq!(code(&play_with_trace(&path, &["--h", "7", "--adversary", "case-b", "--delta", "1/8"])), 0);
    assert_eq!(code(&splitgame(&["verify", path.to_str().unwrap()])), 0);

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let first_leaf = lines
        .iter()
        .find(|v| v["kind"] == "move" && v["mover"] == "M")
        .map(|v| v["assignments"][0]["path"].clone())
        .unwrap();
    let last_m = lines.iter_mut().rev().find(|v| v["kind"] == "move" && v["mover"] == "M").unwrap();
    last_m["assignments"]
        .as_array_mut()
        .unwrap()
        .push(serde_json::json!({"valuation": "t", "path": first_leaf, "value": "1/2"}));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    let out = splitgame(&["verify", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("line"), "{}", stdout(&out));

    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "{\"kind\":\n").unwrap();
    assert_eq!(code(&splitgame(&["verify", garbage.to_str().unwrap()])), 2);
    assert_eq!(code(&splitgame(&["verify", dir.path().join("missing").to_str().unwrap()])), 2);
}

#[test]
fn session_traces_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let out = splitgame(&["compose", "--stages", "4", "--adversary", "random", "--seed", "3", "--trace", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&splitgame(&["verify", path.to_str().unwrap()])), 0);
}

#[test]
fn traces_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let args = ["--h", "5", "--adversary", "random", "--seed", "12"];
    play_with_trace(&a, &args);
    play_with_trace(&b, &args);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!std::fs::read(&a).unwrap().is_empty());
}

#[test]
fn multiple_runs_refuse_a_single_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let out = play_with_trace(&path, &["--h", "3", "--runs", "2"]);
    assert_eq!(code(&out), 2);
}
