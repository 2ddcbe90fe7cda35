use serde::{Deserialize, Serialize};

use super::{check_addressed, reply_to, Agent, AgentError};
use crate::classifier::UtteranceCategory;
use crate::datasets::DatasetRecord;
use crate::protocol::{AgentId, Context, Message, MessageKind, MessageString};

const FALLBACK_CLARIFICATION: &str = "Please reconsider your answer.";

/// Conditions a rule fires on. Every present field must hold.
///
/// Text fields may use the placeholders listed on [`ReplyTemplate`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incoming: Option<UtteranceCategory>,
    /// Substring of any incoming utterance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    /// Substring of the initiator's first question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_contains: Option<String>,
    /// Substring of the background or any visible utterance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_contains: Option<String>,
    /// 1-based turn index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplyKind {
    Question,
    Answer,
    Statement,
    Termination,
}

/// Reply shape plus utterance templates.
///
/// Placeholders: `{record_id}`, `{gold}`, `{passage}`, `{question}`,
/// `{incoming}` and `{next_clarification}`, the first passage sentence not
/// yet said in the conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyTemplate {
    pub kind: ReplyKind,
    #[serde(default)]
    pub texts: Vec<String>,
}

impl ReplyTemplate {
    pub fn termination() -> Self {
        Self {
            kind: ReplyKind::Termination,
            texts: Vec::new(),
        }
    }

    pub fn new<I, S>(kind: ReplyKind, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            kind,
            texts: texts.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRule {
    #[serde(default)]
    pub when: Trigger,
    pub reply: ReplyTemplate,
}

fn default_reply() -> ReplyTemplate {
    ReplyTemplate::new(ReplyKind::Termination, Vec::<String>::new())
}

/// Ordered rules, first match wins, with a fallback reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedPolicy {
    #[serde(default)]
    pub rules: Vec<PolicyRule>,
    #[serde(default = "default_reply")]
    pub default: ReplyTemplate,
}

impl Default for ScriptedPolicy {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            default: default_reply(),
        }
    }
}

impl ScriptedPolicy {
    pub fn new(rules: Vec<PolicyRule>, default: ReplyTemplate) -> Self {
        Self { rules, default }
    }

    /// Answers every question with a counter-question.
    pub fn counter_question() -> Self {
        Self::new(
            vec![PolicyRule {
                when: Trigger {
                    incoming: Some(UtteranceCategory::QuestionLike),
                    ..Trigger::default()
                },
                reply: ReplyTemplate::new(ReplyKind::Question, ["Which one do you mean?"]),
            }],
            ReplyTemplate::new(ReplyKind::Statement, ["ok"]),
        )
    }

    /// Answers with the record's first gold answer.
    pub fn gold_answerer() -> Self {
        Self::new(
            vec![PolicyRule {
                when: Trigger {
                    incoming: Some(UtteranceCategory::QuestionLike),
                    ..Trigger::default()
                },
                reply: ReplyTemplate::new(ReplyKind::Answer, ["{gold}"]),
            }],
            ReplyTemplate::termination(),
        )
    }

    /// Initiator side: clarifies with passage sentences until they run out.
    pub fn passage_clarifier() -> Self {
        Self::new(
            vec![PolicyRule {
                when: Trigger {
                    incoming: Some(UtteranceCategory::QuestionLike),
                    ..Trigger::default()
                },
                reply: ReplyTemplate::new(ReplyKind::Answer, ["{next_clarification}"]),
            }],
            ReplyTemplate::new(ReplyKind::Statement, ["{next_clarification}"]),
        )
    }

    /// Built-in policies addressable by name from the command line.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "counter-question" => Some(Self::counter_question()),
            "gold" => Some(Self::gold_answerer()),
            "passage-clarifier" => Some(Self::passage_clarifier()),
            _ => None,
        }
    }
}

fn incoming_category(kind: MessageKind) -> UtteranceCategory {
    match kind {
        MessageKind::Question => UtteranceCategory::QuestionLike,
        MessageKind::Answer => UtteranceCategory::AnswerLike,
        MessageKind::Statement => UtteranceCategory::StatementLike,
        MessageKind::Termination => UtteranceCategory::TerminationLike,
    }
}

struct Slots<'a> {
    record: Option<&'a DatasetRecord>,
    context: &'a Context,
    incoming: &'a Message,
}

impl Slots<'_> {
    fn next_clarification(&self) -> String {
        let passage = self.record.and_then(|r| r.passage.as_deref()).unwrap_or("");
        split_sentences(passage)
            .into_iter()
            .find(|s| {
                !self
                    .context
                    .message_strings()
                    .any(|m| m.texts().iter().any(|t| t.contains(s.as_str())))
            })
            .unwrap_or_else(|| FALLBACK_CLARIFICATION.to_string())
    }

    fn fill(&self, template: &str) -> String {
        if !template.contains('{') {
            return template.to_string();
        }
        let record = self.record;
        let mut out = template
            .replace("{record_id}", record.map_or("", |r| r.id.as_str()))
            .replace(
                "{gold}",
                record.and_then(|r| r.gold_answers.first()).map_or("", String::as_str),
            )
            .replace("{passage}", record.and_then(|r| r.passage.as_deref()).unwrap_or(""))
            .replace(
                "{question}",
                self.context
                    .initial_question()
                    .or(record.map(|r| r.question.as_str()))
                    .unwrap_or(""),
            )
            .replace("{incoming}", &self.incoming.payload().texts().join(" "));
        if out.contains("{next_clarification}") {
            out = out.replace("{next_clarification}", &self.next_clarification());
        }
        out
    }
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            start = end;
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

/// Agent driven by a [`ScriptedPolicy`].
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    id: AgentId,
    policy: ScriptedPolicy,
    record: Option<DatasetRecord>,
}

impl ScriptedAgent {
    pub fn new(id: AgentId, policy: ScriptedPolicy) -> Self {
        Self {
            id,
            policy,
            record: None,
        }
    }

    pub fn policy(&self) -> &ScriptedPolicy {
        &self.policy
    }

    fn matches(&self, when: &Trigger, slots: &Slots<'_>) -> bool {
        let incoming = slots.incoming.payload();
        if when
            .incoming
            .is_some_and(|c| c != incoming_category(incoming.kind()))
        {
            return false;
        }
        if when.turn.is_some_and(|t| t != slots.context.turn_index()) {
            return false;
        }
        if let Some(needle) = &when.contains {
            let needle = slots.fill(needle);
            if !incoming.texts().iter().any(|t| t.contains(&needle)) {
                return false;
            }
        }
        if let Some(needle) = &when.question_contains {
            let needle = slots.fill(needle);
            let q = slots
                .context
                .initial_question()
                .or(self.record.as_ref().map(|r| r.question.as_str()))
                .unwrap_or("");
            if !q.contains(&needle) {
                return false;
            }
        }
        if let Some(needle) = &when.context_contains {
            if !slots.context.contains_text(&slots.fill(needle)) {
                return false;
            }
        }
        true
    }

    fn build(&self, template: &ReplyTemplate, slots: &Slots<'_>) -> Result<MessageString, AgentError> {
        let texts: Vec<String> = template.texts.iter().map(|t| slots.fill(t)).collect();
        let payload = match template.kind {
            ReplyKind::Termination => MessageString::Termination,
            ReplyKind::Statement => MessageString::Statement { texts },
            ReplyKind::Question => {
                let [text] = <[String; 1]>::try_from(texts)
                    .map_err(|_| AgentError::Policy("question templates need exactly one text".into()))?;
                MessageString::Question {
                    id: slots.context.next_question_id(),
                    text,
                }
            }
            ReplyKind::Answer => {
                let id = match slots.incoming.payload() {
                    MessageString::Question { id, .. } => *id,
                    _ => slots
                        .context
                        .pending_question_for_me()
                        .map(|(id, _)| id)
                        .ok_or_else(|| AgentError::Policy("no question to answer".into()))?,
                };
                MessageString::Answer { id, texts }
            }
        };
        payload.validate()?;
        Ok(payload)
    }
}

impl Agent for ScriptedAgent {
    fn id(&self) -> &AgentId {
        &self.id
    }

    fn bind_record(&mut self, record: &DatasetRecord) {
        self.record = Some(record.clone());
    }

    fn respond(&mut self, context: &Context, incoming: &Message) -> Result<Message, AgentError> {
        check_addressed(&self.id, incoming)?;
        let slots = Slots {
            record: self.record.as_ref(),
            context,
            incoming,
        };
        let template = self
            .policy
            .rules
            .iter()
            .find(|r| self.matches(&r.when, &slots))
            .map_or(&self.policy.default, |r| &r.reply);
        let payload = self.build(template, &slots)?;
        reply_to(&self.id, incoming, payload)
    }

    fn categorizer_name(&self) -> String {
        "scripted".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{context_at, Background, Interaction};

    fn record() -> DatasetRecord {
        DatasetRecord {
            id: "r1".into(),
            question: "Can I claim?".into(),
            gold_answers: vec!["Yes".into()],
            passage: Some("You must be over 18. You must live in the UK.".into()),
            source: "test".into(),
        }
    }

    fn first_turn(agent: &AgentId, text: &str) -> (Context, Message) {
        let m = AgentId::machine("m");
        let msg = Message::new(m.clone(), MessageString::question(1, text), agent.clone()).unwrap();
        let i = Interaction::from_messages(m, agent.clone(), [msg.clone()]).unwrap();
        (context_at(&i, agent, 1, &Background::new()).unwrap(), msg)
    }

    #[test]
    fn counter_question_policy() {
        let id = AgentId::scripted("s");
        let mut a = ScriptedAgent::new(id.clone(), ScriptedPolicy::counter_question());
        let (ctx, msg) = first_turn(&id, "Can I claim?");
        let reply = a.respond(&ctx, &msg).unwrap();
        // first rule matches a question: counter-question with the next free id
        assert_eq!(reply.payload(), &MessageString::question(2, "Which one do you mean?"));
        assert_eq!(reply.receiver().name(), "m");
    }

    #[test]
    fn gold_placeholder_and_default() {
        let id = AgentId::scripted("s");
        let mut a = ScriptedAgent::new(id.clone(), ScriptedPolicy::gold_answerer());
        a.bind_record(&record());
        let (ctx, msg) = first_turn(&id, "Can I claim?");
        assert_eq!(a.respond(&ctx, &msg).unwrap().payload(), &MessageString::answer(1, ["Yes"]));
    }

    #[test]
    fn clarifications_walk_the_passage() {
        let me = AgentId::scripted("h");
        let other = AgentId::machine("m");
        let mut a = ScriptedAgent::new(me.clone(), ScriptedPolicy::passage_clarifier());
        a.bind_record(&record());
        let msgs = [
            Message::new(me.clone(), MessageString::question(1, "Can I claim?"), other.clone()).unwrap(),
            Message::new(other.clone(), MessageString::question(2, "How old are you?"), me.clone()).unwrap(),
        ];
        let i = Interaction::from_messages(me.clone(), other.clone(), msgs.clone()).unwrap();
        let ctx = context_at(&i, &me, 2, &Background::new()).unwrap();
        let reply = a.respond(&ctx, &msgs[1]).unwrap();
        assert_eq!(reply.payload(), &MessageString::answer(2, ["You must be over 18."]));

        let mut msgs = msgs.to_vec();
        msgs.push(reply);
        msgs.push(Message::new(other.clone(), MessageString::question(3, "Where?"), me.clone()).unwrap());
        msgs.push(Message::new(me.clone(), MessageString::answer(3, ["You must live in the UK."]), other.clone()).unwrap());
        msgs.push(Message::new(other.clone(), MessageString::question(4, "More?"), me.clone()).unwrap());
        let i = Interaction::from_messages(me.clone(), other.clone(), msgs.clone()).unwrap();
        // the passage sitting in the background does not count as said
        let bg = Background::from_statements([record().passage.unwrap()]);
        let ctx = context_at(&i, &me, 4, &bg).unwrap();
        let reply = a.respond(&ctx, &msgs[5]).unwrap();
        assert_eq!(reply.payload(), &MessageString::answer(4, [FALLBACK_CLARIFICATION]));
    }

    #[test]
    fn triggers_expand_placeholders() {
        let policy: ScriptedPolicy = serde_json::from_str(
            r#"{"rules":[{"when":{"question_contains":"[{record_id}]"},"reply":{"kind":"answer","texts":["{gold}"]}}]}"#,
        )
        .unwrap();
        assert_eq!(policy.default, ReplyTemplate::termination());
        let id = AgentId::scripted("s");
        let mut a = ScriptedAgent::new(id.clone(), policy);
        let mut r = record();
        r.id = "r7".into();
        a.bind_record(&r);
        let (ctx, msg) = first_turn(&id, "What about [r7]?");
        assert_eq!(a.respond(&ctx, &msg).unwrap().payload(), &MessageString::answer(1, ["Yes"]));
        let (ctx, msg) = first_turn(&id, "What about [r8]?");
        assert_eq!(a.respond(&ctx, &msg).unwrap().payload(), &MessageString::Termination);
    }

    #[test]
    fn misaddressed_is_rejected() {
        let mut a = ScriptedAgent::new(AgentId::scripted("s"), ScriptedPolicy::default());
        let (ctx, msg) = first_turn(&AgentId::scripted("other"), "q?");
        assert!(matches!(a.respond(&ctx, &msg), Err(AgentError::Misaddressed { .. })));
    }

    #[test]
    fn sentence_split() {
        assert_eq!(split_sentences("A. B? C"), vec!["A.", "B?", "C"]);
        assert!(split_sentences("  ").is_empty());
    }
}
