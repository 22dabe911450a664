mod common;

use common::mutate::{lower_value as lower_a_value, mismatch_siblings, relabel};
use serde_json::{json, Value};
use splitgame::adversary::AdversaryConfig;
use splitgame::composer::Session;
use splitgame::play::play_finite;
use splitgame::rational::Rational;
use splitgame::trace::{verify, write_jsonl, TraceKind, ViolationClass};
use splitgame::tree::ParityRole;

fn finite_lines(h: u32, cfg: &AdversaryConfig) -> Vec<Value> {
    let run = play_finite(h, 0, cfg).unwrap();
    to_values(&run.records)
}

fn session_lines(h: u32, cfg: AdversaryConfig, stages: usize) -> Vec<Value> {
    let mut s = Session::new(h, cfg, stages).unwrap();
    s.run(200).unwrap();
    to_values(s.records())
}

fn to_values<T: serde::Serialize>(records: &[T]) -> Vec<Value> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records).unwrap();
    String::from_utf8(buf).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn check(lines: &[Value]) -> Result<splitgame::trace::VerifySummary, splitgame::trace::VerifyError> {
    let text: String = lines.iter().map(|v| format!("{v}\n")).collect();
    verify(text.as_bytes())
}

fn scenarios() -> Vec<(&'static str, Vec<Value>)> {
    vec![
        ("finite passive", finite_lines(3, &AdversaryConfig::passive())),
        ("finite case-a", finite_lines(5, &AdversaryConfig::case_a(2, ParityRole::EvenBettor))),
        ("finite case-b", finite_lines(7, &AdversaryConfig::case_b(Rational::ratio(1, 8)))),
        ("finite random", finite_lines(5, &AdversaryConfig::random(11, 30))),
        ("session passive", session_lines(3, AdversaryConfig::passive(), 4)),
        ("session case-b", session_lines(3, AdversaryConfig::case_b(Rational::ratio(1, 64)), 3)),
        ("session random", session_lines(3, AdversaryConfig::random(5, 40), 4)),
    ]
}

#[test]
fn emitted_traces_verify() {
    for (name, lines) in scenarios() {
        let summary = check(&lines).unwrap_or_else(|e| panic!("{name}: {e}"));
        let want = if name.starts_with("finite") { TraceKind::Finite } else { TraceKind::Session };
        assert_eq!(summary.kind, want, "{name}");
    }
}

#[test]
fn mutations_are_caught_with_the_right_class() {
    let mutations: [(fn(&mut [Value]) -> bool, ViolationClass); 3] = [
        (lower_a_value, ViolationClass::Monotonicity),
        (mismatch_siblings, ViolationClass::Structure),
        (relabel, ViolationClass::Label),
    ];
    let mut applied = [0; 3];
    for (name, lines) in scenarios() {
        for (i, (mutate, class)) in mutations.iter().enumerate() {
            let mut bad = lines.clone();
            if !mutate(&mut bad) {
                continue;
            }
            applied[i] += 1;
            let err = check(&bad).expect_err(name);
            assert_eq!(err.class(), Some(*class), "{name}: {err}");
            assert_eq!(err.exit_code(), 1);
        }
    }
    assert!(applied.iter().all(|&n| n >= 3), "{applied:?}");
}

#[test]
fn malformed_input() {
    let err = verify("not json\n".as_bytes()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let err = verify(r#"{"kind":"move"}"#.as_bytes()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert_eq!(verify("".as_bytes()).unwrap_err().exit_code(), 2);
}

#[test]
fn tampered_verdict_is_caught() {
    let mut lines = finite_lines(3, &AdversaryConfig::passive());
    let last = lines.last_mut().unwrap();
    *last = json!({"kind": "verdict", "result": "a-wins"});
    assert_eq!(check(&lines).unwrap_err().class(), Some(ViolationClass::Verdict));
}

#[test]
fn traces_are_deterministic() {
    let a = finite_lines(5, &AdversaryConfig::random(3, 25));
    let b = finite_lines(5, &AdversaryConfig::random(3, 25));
    assert_eq!(a, b);
    let a = session_lines(3, AdversaryConfig::random(9, 30), 4);
    let b = session_lines(3, AdversaryConfig::random(9, 30), 4);
    assert_eq!(a, b);
}
