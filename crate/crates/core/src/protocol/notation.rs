//! Canonical one-line notation for message strings.
//!
//! ```text
//! BOX                termination
//! ?<n>(<text>)       question n, exactly one utterance
//! !<n>(<a>|<b>|...)  answers to question n, zero or more utterances
//! T(<a>|<b>|...)     statement, one or more utterances
//! ```
//!
//! Inside a payload `|` separates utterances; a literal `|` or `\` is written
//! `\|` or `\\`. The payload runs to the final `)`, so parentheses in content
//! need no escaping.

use super::error::NotationError;
use super::message::{MessageString, QuestionId};

const TERMINATION: &str = "BOX";

pub fn render_message_string(msg: &MessageString) -> String {
    match msg {
        MessageString::Termination => TERMINATION.to_string(),
        MessageString::Question { id, text } => format!("?{}({})", id.0, escape(text)),
        MessageString::Answer { id, texts } => format!("!{}({})", id.0, join(texts)),
        MessageString::Statement { texts } => format!("T({})", join(texts)),
    }
}

pub fn parse_message_string(text: &str) -> Result<MessageString, NotationError> {
    if text == TERMINATION {
        return Ok(MessageString::Termination);
    }
    let mut chars = text.char_indices();
    let (sigil, id_start) = match chars.next() {
        Some((_, c @ ('?' | '!' | 'T'))) => (c, c.len_utf8()),
        Some(_) => {
            return Err(NotationError::Malformed {
                pos: 0,
                reason: "expected one of BOX, ?, ! or T",
            })
        }
        None => {
            return Err(NotationError::Malformed {
                pos: 0,
                reason: "empty input",
            })
        }
    };

    let open = text[id_start..]
        .find('(')
        .map(|i| i + id_start)
        .ok_or(NotationError::Malformed {
            pos: text.len(),
            reason: "missing '('",
        })?;
    let digits = &text[id_start..open];
    let id = match sigil {
        'T' => {
            if !digits.is_empty() {
                return Err(NotationError::Malformed {
                    pos: id_start,
                    reason: "statement takes no identifier",
                });
            }
            None
        }
        _ => Some(parse_id(digits, id_start)?),
    };

    if !text.ends_with(')') || text.len() < open + 2 {
        return Err(NotationError::Malformed {
            pos: text.len(),
            reason: "missing closing ')'",
        });
    }
    let payload_start = open + 1;
    let utterances = split_payload(&text[payload_start..text.len() - 1], payload_start)?;

    match (sigil, id) {
        ('?', Some(id)) => {
            if utterances.len() != 1 {
                return Err(NotationError::Arity {
                    kind: "question",
                    expected: "exactly 1",
                    found: utterances.len(),
                });
            }
            let text = utterances.into_iter().next().unwrap_or_default();
            Ok(MessageString::Question { id, text })
        }
        ('!', Some(id)) => Ok(MessageString::Answer {
            id,
            texts: utterances,
        }),
        _ => {
            if utterances.is_empty() {
                return Err(NotationError::Arity {
                    kind: "statement",
                    expected: "at least 1",
                    found: 0,
                });
            }
            Ok(MessageString::Statement { texts: utterances })
        }
    }
}

fn parse_id(digits: &str, pos: usize) -> Result<QuestionId, NotationError> {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(NotationError::Malformed {
            pos,
            reason: "expected a decimal question identifier",
        });
    }
    digits
        .parse::<u64>()
        .map(QuestionId)
        .map_err(|_| NotationError::Malformed {
            pos,
            reason: "question identifier out of range",
        })
}

fn split_payload(payload: &str, offset: usize) -> Result<Vec<String>, NotationError> {
    if payload.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut current = String::new();
    let mut current_start = offset;
    let mut chars = payload.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some((_, e @ ('\\' | '|'))) => current.push(e),
                _ => {
                    return Err(NotationError::Malformed {
                        pos: offset + i,
                        reason: "dangling or unknown escape",
                    })
                }
            },
            '|' => {
                if current.is_empty() {
                    return Err(NotationError::EmptyUtterance { pos: current_start });
                }
                out.push(std::mem::take(&mut current));
                current_start = offset + i + 1;
            }
            c => current.push(c),
        }
    }
    if current.is_empty() {
        return Err(NotationError::EmptyUtterance { pos: current_start });
    }
    out.push(current);
    Ok(out)
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '\\' || c == '|' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn join(texts: &[String]) -> String {
    texts.iter().map(|t| escape(t)).collect::<Vec<_>>().join("|")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn termination() {
        assert_eq!(parse_message_string("BOX"), Ok(MessageString::Termination));
        assert_eq!(render_message_string(&MessageString::Termination), "BOX");
    }

    #[test]
    fn height_question() {
        assert_eq!(
            parse_message_string("?1(What is the height of y)"),
            Ok(MessageString::question(1, "What is the height of y"))
        );
    }

    #[test]
    fn two_answers() {
        let parsed = parse_message_string("!1(y is +2|y is -2)").unwrap();
        // independent check: structural compare, then re-render
        assert_eq!(parsed, MessageString::answer(1, ["y is +2", "y is -2"]));
        assert_eq!(render_message_string(&parsed), "!1(y is +2|y is -2)");
    }

    #[test]
    fn ok_statement_and_empty_answer() {
        assert_eq!(
            render_message_string(&MessageString::statement(["ok"])),
            "T(ok)"
        );
        assert_eq!(
            render_message_string(&MessageString::answer(1, Vec::<String>::new())),
            "!1()"
        );
        assert_eq!(
            parse_message_string("!1()"),
            Ok(MessageString::answer(1, Vec::<String>::new()))
        );
    }

    #[test]
    fn escapes_and_parentheses() {
        let m = MessageString::statement(["a|b", r"c\d", "f(x) = (y)"]);
        let text = render_message_string(&m);
        assert_eq!(text, r"T(a\|b|c\\d|f(x) = (y))");
        assert_eq!(parse_message_string(&text), Ok(m));
    }

    #[test]
    fn question_arity() {
        assert!(matches!(
            parse_message_string("?1(a|b)"),
            Err(NotationError::Arity { found: 2, .. })
        ));
        assert!(matches!(
            parse_message_string("?1()"),
            Err(NotationError::Arity { found: 0, .. })
        ));
        assert!(matches!(
            parse_message_string("T()"),
            Err(NotationError::Arity { found: 0, .. })
        ));
    }

    #[test]
    fn malformed_positions() {
        assert_eq!(
            parse_message_string("X(1)"),
            Err(NotationError::Malformed {
                pos: 0,
                reason: "expected one of BOX, ?, ! or T"
            })
        );
        assert!(matches!(
            parse_message_string("?(q)"),
            Err(NotationError::Malformed { pos: 1, .. })
        ));
        assert!(matches!(
            parse_message_string("?1(q"),
            Err(NotationError::Malformed { pos: 4, .. })
        ));
        assert!(matches!(
            parse_message_string("T1(a)"),
            Err(NotationError::Malformed { pos: 1, .. })
        ));
        assert!(matches!(
            parse_message_string(r"T(a\x)"),
            Err(NotationError::Malformed { pos: 3, .. })
        ));
        assert_eq!(
            parse_message_string("T(a||b)"),
            Err(NotationError::EmptyUtterance { pos: 4 })
        );
        assert!(parse_message_string("").is_err());
        assert!(parse_message_string("box").is_err());
    }

    fn utterance() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 ?!.,()|\\\\+-]{1,12}"
    }

    fn message_string() -> impl Strategy<Value = MessageString> {
        prop_oneof![
            Just(MessageString::Termination),
            (0u64..1000, utterance()).prop_map(|(id, t)| MessageString::question(id, t)),
            (0u64..1000, prop::collection::vec(utterance(), 0..4))
                .prop_map(|(id, ts)| MessageString::answer(id, ts)),
            prop::collection::vec(utterance(), 1..4).prop_map(MessageString::statement),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(m in message_string()) {
            let text = render_message_string(&m);
            prop_assert_eq!(parse_message_string(&text), Ok(m));
        }
    }
}
