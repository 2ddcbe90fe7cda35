mod common;

use std::time::{Duration, Instant};

use common::{build, enumerate, exhaustive_equivalence, scan, Expected, Tok};
use dialoggate::agents::{OracleAgent, OracleTable};
use dialoggate::classifier::{
    categorize_utterance, classify_initial_question, detect_possibly_ambiguous, detect_possibly_incomplete,
    oracle_classify, OracleVerdict, QuestionStatus, UtteranceCategory,
};
use dialoggate::{AgentId, Background, QuestionId};
use serde::Deserialize;

#[test]
fn exhaustive_four_turn_equivalence() {
    let started = Instant::now();
    let n = exhaustive_equivalence(4).unwrap_or_else(|e| panic!("{e}"));
    assert_eq!(n, enumerate(4).len());
    assert!(n > 5_000, "only {n} sequences enumerated");
    assert!(started.elapsed() < Duration::from_secs(10), "took {:?}", started.elapsed());
}

#[test]
fn enumeration_covers_every_pattern() {
    let all = enumerate(3);
    let has = |f: &dyn Fn(Expected) -> bool| all.iter().any(|t| f(scan(t)));
    assert!(has(&|e| matches!(e, Expected::Incomplete(1, 2))));
    assert!(has(&|e| matches!(e, Expected::Incomplete(2, 3))));
    assert!(has(&|e| matches!(e, Expected::Ambiguous(2, 3))));
    assert!(has(&|e| e == Expected::Single));
    assert!(has(&|e| e == Expected::NoQuestion));
    assert!(all.iter().all(|t| t.len() <= 6));
}

#[test]
fn one_turn_never_flags() {
    for t in enumerate(1) {
        let i = build(&t);
        if let Ok(status) = classify_initial_question(&i) {
            assert!(status.evidence().is_none(), "{t:?}");
        }
    }
}

#[test]
fn second_turn_must_open_with_a_statement() {
    let i = build(&[Tok::Q(1), Tok::A(1), Tok::Q(2), Tok::A(2)]);
    assert_eq!(detect_possibly_ambiguous(&i, QuestionId(1)).unwrap(), None);
    let i = build(&[Tok::Q(1), Tok::A(1), Tok::S, Tok::S]);
    assert!(detect_possibly_ambiguous(&i, QuestionId(1)).unwrap().is_some());
}

#[test]
fn incomplete_wins_over_ambiguous() {
    // pa at turns (1,2) and pi at turns (2,3)
    let i = build(&[Tok::Q(1), Tok::A(1), Tok::S, Tok::Q(2), Tok::A(2), Tok::A(1)]);
    assert!(detect_possibly_incomplete(&i, QuestionId(1)).unwrap().is_none());
    let i = build(&[Tok::Q(1), Tok::A(1), Tok::Q(2), Tok::Q(3), Tok::A(3), Tok::S, Tok::S, Tok::S]);
    assert!(matches!(
        classify_initial_question(&i).unwrap(),
        QuestionStatus::PossiblyIncomplete(e) if e.as_array() == [2, 3]
    ));
}

#[test]
fn questions_not_asked_are_errors() {
    let i = build(&[Tok::Q(1), Tok::Q(2)]);
    assert!(detect_possibly_incomplete(&i, QuestionId(2)).is_err());
    assert!(detect_possibly_ambiguous(&i, QuestionId(7)).is_err());
}

#[derive(Deserialize)]
struct Labeled {
    text: String,
    reply: bool,
    label: UtteranceCategory,
}

#[test]
fn categorizer_matches_hand_labels() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/utterances.json");
    let rows: Vec<Labeled> = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(rows.len(), 50);
    let wrong: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            let got = categorize_utterance(&r.text, r.reply);
            (got != r.label).then(|| format!("{:?} (reply={}) -> {got}, labeled {}", r.text, r.reply, r.label))
        })
        .collect();
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}

#[test]
fn oracle_verdicts() {
    let positive = Background::from_statements(["Height has to be positive."]);
    let mut t = OracleTable::new();
    t.insert("What is the height of y", &Background::new(), ["y=+2", "y=-2"]);
    t.insert("What is the height of y", &positive, ["y=+2"]);
    t.insert("Does this country have social security agreements with the UK?", &Background::new(), Vec::<String>::new());
    let mut o = OracleAgent::new(AgentId::oracle("delta"), t);
    assert_eq!(
        oracle_classify("What is the height of y", &mut o, &positive).unwrap(),
        OracleVerdict::Answerable("y=+2".into())
    );
    assert_eq!(
        oracle_classify("What is the height of y", &mut o, &Background::new()).unwrap(),
        OracleVerdict::Ambiguous(vec!["y=+2".into(), "y=-2".into()])
    );
    assert_eq!(
        oracle_classify("Does this country have social security agreements with the UK?", &mut o, &Background::new())
            .unwrap(),
        OracleVerdict::Incomplete
    );
}
