//! Independent oracles and generators shared by the integration suites.
#![allow(dead_code)]

use dialoggate::agents::{Agent, OracleAgent, OracleTable};
use dialoggate::classifier::{classify_initial_question, oracle_classify, OracleVerdict, QuestionStatus};
use dialoggate::experiment::{ExperimentReport, Session, SessionState, SessionStatus};
use dialoggate::protocol::transcript::{read_transcript, write_transcript};
use dialoggate::protocol::{context_at, parse_message_string, render_message_string};
use dialoggate::{AgentId, Background, Interaction, Message, MessageString, ProtocolError};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// A message reduced to its category and id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tok {
    Q(u64),
    A(u64),
    S,
    T,
}

pub fn h() -> AgentId {
    AgentId::human("h")
}

pub fn m() -> AgentId {
    AgentId::machine("m")
}

pub fn payload(t: Tok, pos: usize) -> MessageString {
    match t {
        Tok::Q(id) => MessageString::question(id, format!("question at {pos}")),
        Tok::A(id) => MessageString::answer(id, [format!("answer at {pos}")]),
        Tok::S => MessageString::statement([format!("statement at {pos}")]),
        Tok::T => MessageString::Termination,
    }
}

/// Pushes tokens alternately from `a` and `b`; reports the first failure
/// with its position.
pub fn build_between(tokens: &[Tok], a: &AgentId, b: &AgentId) -> Result<Interaction, (usize, ProtocolError)> {
    let mut i = Interaction::new(a.clone(), b.clone()).map_err(|e| (0, e))?;
    for (pos, t) in tokens.iter().enumerate() {
        let (s, r) = if pos % 2 == 0 { (a, b) } else { (b, a) };
        let msg = Message::new(s.clone(), payload(*t, pos), r.clone()).map_err(|e| (pos, e))?;
        i.push(msg).map_err(|e| (pos, e))?;
    }
    Ok(i)
}

pub fn build(tokens: &[Tok]) -> Interaction {
    build_between(tokens, &h(), &m()).expect("valid token sequence")
}

/// Moves allowed after `prefix`, by the rules of the message model.
pub fn next_moves(prefix: &[Tok]) -> Vec<Tok> {
    if prefix.last() == Some(&Tok::T) {
        return Vec::new();
    }
    let pos = prefix.len();
    let sender = pos % 2;
    let next_id = prefix
        .iter()
        .filter_map(|t| match t {
            Tok::Q(id) => Some(*id),
            _ => None,
        })
        .max()
        .unwrap_or(0)
        + 1;
    let mut moves = vec![Tok::Q(next_id), Tok::S];
    for (p, t) in prefix.iter().enumerate() {
        if let Tok::Q(id) = t {
            if p % 2 != sender {
                moves.push(Tok::A(*id));
            }
        }
    }
    if sender == 1 {
        moves.push(Tok::T);
    }
    moves
}

/// Every nonempty valid sequence of at most `2 * max_turns` messages.
pub fn enumerate(max_turns: usize) -> Vec<Vec<Tok>> {
    fn walk(prefix: &mut Vec<Tok>, limit: usize, out: &mut Vec<Vec<Tok>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        if prefix.len() == limit {
            return;
        }
        for t in next_moves(prefix) {
            prefix.push(t);
            walk(prefix, limit, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(&mut Vec::new(), 2 * max_turns, &mut out);
    out
}

/// Picks a valid sequence by indexing into the allowed moves at each step.
pub fn from_choices(choices: &[u8]) -> Vec<Tok> {
    let mut tokens = Vec::new();
    for c in choices {
        let moves = next_moves(&tokens);
        if moves.is_empty() {
            break;
        }
        tokens.push(moves[*c as usize % moves.len()]);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    NoQuestion,
    Incomplete(usize, usize),
    Ambiguous(usize, usize),
    Single,
    Unresolved,
}

/// Brute-force scan of the token sequence for the two patterns.
pub fn scan(tokens: &[Tok]) -> Expected {
    let openers: Vec<Tok> = tokens.iter().step_by(2).copied().collect();
    let Some(qid) = openers.iter().find_map(|t| match t {
        Tok::Q(id) => Some(*id),
        _ => None,
    }) else {
        return Expected::NoQuestion;
    };
    let turns: Vec<(Tok, Tok)> = tokens.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    for i in 0..turns.len().saturating_sub(1) {
        if let ((Tok::Q(_), Tok::Q(beta)), (Tok::A(x), _)) = (turns[i], turns[i + 1]) {
            if x == beta {
                return Expected::Incomplete(i + 1, i + 2);
            }
        }
    }
    for i in 0..turns.len().saturating_sub(1) {
        if let ((Tok::Q(alpha), Tok::A(x)), (Tok::S, _)) = (turns[i], turns[i + 1]) {
            if x == alpha {
                return Expected::Ambiguous(i + 1, i + 2);
            }
        }
    }
    match turns.last() {
        Some((Tok::Q(a), Tok::A(b))) if *a == qid && *b == qid => Expected::Single,
        _ => Expected::Unresolved,
    }
}

pub fn agrees(tokens: &[Tok]) -> Result<(), String> {
    let interaction = build_between(tokens, &h(), &m()).map_err(|(p, e)| format!("{tokens:?} rejected at {p}: {e}"))?;
    let got = classify_initial_question(&interaction);
    let ok = match (scan(tokens), &got) {
        (Expected::NoQuestion, Err(_)) => true,
        (Expected::Incomplete(a, b), Ok(QuestionStatus::PossiblyIncomplete(e))) => [a, b] == e.as_array(),
        (Expected::Ambiguous(a, b), Ok(QuestionStatus::PossiblyAmbiguous(e))) => [a, b] == e.as_array(),
        (Expected::Single, Ok(QuestionStatus::AnsweredSingleTurn)) => true,
        (Expected::Unresolved, Ok(QuestionStatus::Unresolved)) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{tokens:?}: scanner says {:?}, classifier says {got:?}", scan(tokens)))
    }
}

/// Runs the exhaustive comparison; returns the number of instances checked.
pub fn exhaustive_equivalence(max_turns: usize) -> Result<usize, String> {
    let all = enumerate(max_turns);
    for tokens in &all {
        agrees(tokens)?;
    }
    Ok(all.len())
}

// Arbitrary, possibly invalid, sequences for the safety property.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawMsg {
    pub from_initiator: bool,
    pub tok: Tok,
}

/// Independent statement of the model's rules: index of the first message
/// that must be refused.
pub fn first_invalid(raw: &[RawMsg]) -> Option<usize> {
    let mut asked: Vec<(bool, u64)> = Vec::new();
    let mut last_q = None;
    for (pos, r) in raw.iter().enumerate() {
        if pos > 0 && raw[pos - 1].tok == Tok::T {
            return Some(pos);
        }
        let opening = pos % 2 == 0;
        if r.from_initiator != opening {
            return Some(pos);
        }
        match r.tok {
            Tok::T if opening => return Some(pos),
            Tok::Q(id) => {
                if last_q.is_some_and(|l| id <= l) {
                    return Some(pos);
                }
                last_q = Some(id);
                asked.push((r.from_initiator, id));
            }
            Tok::A(id) => {
                if !asked.contains(&(!r.from_initiator, id)) {
                    return Some(pos);
                }
            }
            _ => {}
        }
    }
    None
}

pub fn raw_strategy() -> impl Strategy<Value = Vec<RawMsg>> {
    let tok = prop_oneof![
        (1u64..6).prop_map(Tok::Q),
        (1u64..6).prop_map(Tok::A),
        Just(Tok::S),
        Just(Tok::T),
    ];
    prop::collection::vec(
        (prop::bool::weighted(0.9), any::<bool>(), tok).prop_map(|(follow, flip, tok)| (follow, flip, tok)),
        0..10,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(pos, (follow, flip, tok))| RawMsg {
                from_initiator: if follow { pos % 2 == 0 } else { flip },
                tok,
            })
            .collect()
    })
}

pub fn valid_strategy() -> impl Strategy<Value = Vec<Tok>> {
    prop::collection::vec(any::<u8>(), 0..14).prop_map(|c| from_choices(&c))
}

fn utterance() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 ?!.,()|\\\\+-]{1,12}".prop_filter("nonblank", |s| !s.trim().is_empty())
}

pub fn message_string_strategy() -> impl Strategy<Value = MessageString> {
    prop_oneof![
        Just(MessageString::Termination),
        (0u64..1000, utterance()).prop_map(|(id, t)| MessageString::question(id, t)),
        (0u64..1000, prop::collection::vec(utterance(), 0..4)).prop_map(|(id, ts)| MessageString::answer(id, ts)),
        prop::collection::vec(utterance(), 1..4).prop_map(MessageString::statement),
    ]
}

// Properties. Each returns an error describing the first violation.

pub fn prop_notation_round_trip(msg: &MessageString) -> Result<(), TestCaseError> {
    let text = render_message_string(msg);
    prop_assert_eq!(parse_message_string(&text), Ok(msg.clone()));
    Ok(())
}

pub fn prop_transcript_round_trip(tokens: &[Tok]) -> Result<(), TestCaseError> {
    if tokens.is_empty() {
        return Ok(());
    }
    let interaction = build(tokens);
    let mut buf = Vec::new();
    write_transcript(&mut buf, &interaction, None).unwrap();
    let back = read_transcript(buf.as_slice()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(back.interaction, interaction);
    Ok(())
}

pub fn prop_turn_parity(tokens: &[Tok]) -> Result<(), TestCaseError> {
    let mut i = Interaction::new(h(), m()).unwrap();
    for (pos, t) in tokens.iter().enumerate() {
        let (s, r) = if pos % 2 == 0 { (h(), m()) } else { (m(), h()) };
        i.push(Message::new(s, payload(*t, pos), r).unwrap()).unwrap();
        prop_assert_eq!(i.turn_count(), (pos + 1) / 2);
        prop_assert_eq!(i.is_complete(), (pos + 1) % 2 == 0);
        if i.is_complete() {
            prop_assert_eq!(i.message_count(), 2 * i.turn_count());
        }
    }
    Ok(())
}

pub fn prop_context_monotone(tokens: &[Tok], background: &[String]) -> Result<(), TestCaseError> {
    let interaction = build(tokens);
    let bg = Background::from_statements(background.iter().cloned());
    let mut previous: Option<dialoggate::Context> = None;
    for turn in 1..=interaction.turn_count() + 1 {
        for agent in [h(), m()] {
            let Ok(c) = context_at(&interaction, &agent, turn, &bg) else {
                continue;
            };
            let expected = if agent == h() { 2 * turn - 2 } else { 2 * turn - 1 };
            prop_assert_eq!(c.visible_messages().len(), expected);
            if let Some(p) = &previous {
                prop_assert!(p.is_subset_of(&c), "context at turn {} shrank", turn);
            }
            previous = Some(c);
        }
    }
    Ok(())
}

pub fn prop_protocol_safety(raw: &[RawMsg]) -> Result<(), TestCaseError> {
    let mut i = Interaction::new(h(), m()).unwrap();
    let expected = first_invalid(raw);
    for (pos, r) in raw.iter().enumerate() {
        let (s, rcv) = if r.from_initiator { (h(), m()) } else { (m(), h()) };
        let msg = Message::new(s, payload(r.tok, pos), rcv).unwrap();
        let outcome = i.push(msg);
        if Some(pos) == expected {
            prop_assert!(outcome.is_err(), "message {} of {:?} was accepted", pos, raw);
            return Ok(());
        }
        prop_assert!(outcome.is_ok(), "message {} of {:?} was refused: {:?}", pos, raw, outcome);
    }
    Ok(())
}

/// Random finished sessions: (tokens, correct turn, errored). Every
/// sequence opens with a question and holds only completed turns.
pub fn sessions_strategy() -> impl Strategy<Value = Vec<(Vec<Tok>, Option<usize>, bool)>> {
    let tokens = prop::collection::vec(any::<u8>(), 1..10).prop_map(|mut c| {
        c[0] = 0;
        let mut t = from_choices(&c);
        if t.len() % 2 == 1 {
            t.pop();
        }
        t
    });
    prop::collection::vec((tokens, prop::option::of(1usize..5), prop::bool::weighted(0.1)), 0..40)
}

pub fn session_from(tokens: &[Tok], correct_at: Option<usize>, errored: bool, n: usize) -> Session {
    let interaction = build(tokens);
    let classification = if errored {
        None
    } else {
        classify_initial_question(&interaction).ok()
    };
    Session {
        state: SessionState {
            record_id: format!("r{n}"),
            status: if errored { SessionStatus::Error } else { SessionStatus::Done },
            max_turns: 4,
            turns_used: interaction.turn_count(),
            classification,
            correct_at: correct_at.filter(|t| *t <= interaction.turn_count()),
            error: errored.then(|| "agent failed".to_string()),
        },
        interaction,
        background: Background::new(),
        logs: Vec::new(),
        categorizer: "rules".into(),
    }
}

pub fn prop_disjoint_accounting(specs: &[(Vec<Tok>, Option<usize>, bool)]) -> Result<(), TestCaseError> {
    let sessions: Vec<Session> = specs
        .iter()
        .enumerate()
        .map(|(n, (t, c, e))| session_from(t, *c, *e, n))
        .collect();
    let report = ExperimentReport::from_sessions("p", &sessions, 4, false, String::new());
    // Recount by hand from the raw classifications.
    let (mut inc, mut amb, mut cor, mut unr) = (0, 0, 0, 0);
    for s in &sessions {
        match (s.state.error.is_some(), s.state.classification) {
            (true, _) => unr += 1,
            (false, Some(QuestionStatus::PossiblyIncomplete(_))) => inc += 1,
            (false, Some(QuestionStatus::PossiblyAmbiguous(_))) => amb += 1,
            (false, Some(QuestionStatus::AnsweredSingleTurn)) if s.state.correct_at == Some(1) => cor += 1,
            _ => unr += 1,
        }
    }
    prop_assert_eq!(report.total, sessions.len());
    prop_assert_eq!((report.incomplete, report.ambiguous, report.single_turn_correct, report.unresolved), (inc, amb, cor, unr));
    prop_assert_eq!(
        report.incomplete + report.ambiguous + report.single_turn_correct + report.unresolved,
        report.total
    );
    let excluded = ExperimentReport::from_sessions("p", &sessions, 4, true, String::new());
    let errored = specs.iter().filter(|s| s.2).count();
    prop_assert_eq!(excluded.total + excluded.excluded, sessions.len());
    prop_assert_eq!(excluded.excluded, errored);
    Ok(())
}

/// With an oracle on either side, a second turn can never be opened and
/// the oracle refuses to answer from a context holding more than the
/// question.
pub fn prop_oracle_one_step(tokens: &[Tok], oracle_initiates: bool) -> Result<(), TestCaseError> {
    let oracle = AgentId::oracle("delta");
    let (a, b) = if oracle_initiates { (oracle.clone(), h()) } else { (h(), oracle.clone()) };
    match build_between(tokens, &a, &b) {
        Ok(i) => prop_assert!(i.message_count() <= 2),
        Err((pos, e)) => {
            if tokens.len() > 2 && pos == 2 {
                prop_assert_eq!(e, ProtocolError::OracleMultiTurn);
            } else {
                prop_assert!(pos < 2 || tokens[..pos].contains(&Tok::T), "{:?} refused at {}: {}", tokens, pos, e);
            }
        }
    }
    if !oracle_initiates && tokens.len() >= 3 {
        // Relay the same sequence through a non-oracle to get a longer context.
        let relay = AgentId::machine("delta");
        let i = build_between(&tokens[..3], &h(), &relay).unwrap();
        let incoming = Message::new(h(), payload(tokens[2], 2), oracle.clone()).unwrap();
        let ctx = context_at(&i, &relay, 2, &Background::new()).unwrap();
        let mut agent = OracleAgent::new(oracle, OracleTable::new());
        prop_assert!(agent.respond(&ctx, &incoming).is_err());
    }
    Ok(())
}

/// The verdict follows the number of ground-truth answers.
pub fn prop_oracle_consistency(question: &str, answers: &[String], background: &[String]) -> Result<(), TestCaseError> {
    let bg = Background::from_statements(background.iter().cloned());
    let mut table = OracleTable::new();
    table.insert(question, &bg, answers.iter().cloned());
    let mut agent = OracleAgent::new(AgentId::oracle("delta"), table);
    let verdict = oracle_classify(question, &mut agent, &bg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut distinct: Vec<&String> = Vec::new();
    for a in answers {
        if !distinct.contains(&a) {
            distinct.push(a);
        }
    }
    match distinct.len() {
        0 => prop_assert_eq!(verdict, OracleVerdict::Incomplete),
        1 => prop_assert_eq!(verdict, OracleVerdict::Answerable(distinct[0].clone())),
        _ => prop_assert!(matches!(verdict, OracleVerdict::Ambiguous(ref v) if v.len() == distinct.len())),
    }
    Ok(())
}

// Published proportions, as printed: (dataset, [incomplete, ambiguous, correct]).

pub const TABLE1: [(&str, [&str; 3]); 6] = [
    ("NQ-open", ["0.02", "0.17", "0.81"]),
    ("SQuAD", ["0.00", "0.08", "0.92"]),
    ("MedDialog", ["0.92", "0.08", "0.00"]),
    ("MultiWOZ", ["0.21", "0.75", "0.04"]),
    ("ShARC", ["0.28", "0.61", "0.11"]),
    ("AmbigNQ", ["0.01", "0.36", "0.63"]),
];

/// Rows for context from 1, 2 and 3 turns.
pub const TABLE2: [(&str, [[&str; 3]; 3]); 6] = [
    ("NQ-open", [["0.02", "0.17", "0.81"], ["0.00", "0.13", "0.87"], ["0.00", "0.11", "0.89"]]),
    ("SQuAD", [["0.00", "0.08", "0.92"], ["0.00", "0.05", "0.95"], ["0.00", "0.03", "0.97"]]),
    ("MedDialog", [["0.92", "0.08", "0.00"], ["0.21", "0.61", "0.18"], ["0.18", "0.56", "0.26"]]),
    ("MultiWOZ", [["0.21", "0.75", "0.04"], ["0.19", "0.56", "0.25"], ["0.18", "0.34", "0.48"]]),
    ("ShARC", [["0.28", "0.61", "0.11"], ["0.02", "0.38", "0.60"], ["0.01", "0.16", "0.83"]]),
    ("AmbigNQ", [["0.01", "0.36", "0.63"], ["0.00", "0.31", "0.69"], ["0.00", "0.22", "0.78"]]),
];

/// Corpus sizes for the single-turn fixtures.
pub fn table1_size(dataset: &str) -> usize {
    if dataset == "MedDialog" {
        25
    } else {
        100
    }
}

/// Category counts that reproduce a printed row over `n` records.
pub fn plant(row: &[&str; 3], n: usize) -> dialoggate::experiment::planted::Level {
    let count = |s: &str| {
        let hundredths: usize = s.replace('.', "").parse().unwrap();
        (hundredths * n + 50) / 100
    };
    dialoggate::experiment::planted::Level::new(count(row[0]), count(row[1]), count(row[2]))
}

pub fn cells(r: &ExperimentReport) -> [String; 3] {
    use dialoggate::experiment::proportion_2dp;
    [
        proportion_2dp(r.incomplete, r.total),
        proportion_2dp(r.ambiguous, r.total),
        proportion_2dp(r.single_turn_correct, r.total),
    ]
}

pub fn base_config(name: &str) -> dialoggate::experiment::ExperimentConfig {
    let mut c = dialoggate::experiment::ExperimentConfig::new(name);
    c.max_turns = 4;
    c
}
