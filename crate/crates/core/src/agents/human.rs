//! Queue between a live session loop and a human at the console.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_addressed, reply_to, Agent, AgentError};
use crate::protocol::{AgentId, Context, Message, MessageString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HumanInputKind {
    #[serde(rename = "q")]
    Question,
    #[serde(rename = "a")]
    Answer,
    #[serde(rename = "stmt")]
    Statement,
    #[serde(rename = "term")]
    Termination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanDraft {
    pub kind: HumanInputKind,
    #[serde(default)]
    pub text: String,
}

impl HumanDraft {
    pub fn new(kind: HumanInputKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
        }
    }

    /// Resolves ids against the context: answers go to the question the
    /// human owes a reply to, questions take the next free id.
    pub fn to_payload(&self, context: &Context, incoming: Option<&Message>) -> Result<MessageString, AgentError> {
        let text = self.text.trim();
        if text.is_empty() && self.kind != HumanInputKind::Termination {
            return Err(AgentError::Policy("empty utterance".into()));
        }
        Ok(match self.kind {
            HumanInputKind::Termination => MessageString::Termination,
            HumanInputKind::Statement => MessageString::statement([text]),
            HumanInputKind::Question => MessageString::question(context.next_question_id().0, text),
            HumanInputKind::Answer => {
                let id = match incoming.map(Message::payload) {
                    Some(MessageString::Question { id, .. }) => id.0,
                    _ => context
                        .pending_question_for_me()
                        .map(|(id, _)| id.0)
                        .ok_or_else(|| AgentError::Policy("there is no question to answer".into()))?,
                };
                MessageString::answer(id, [text])
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error("timed out waiting for human input")]
    Timeout,
    #[error("bridge closed")]
    Closed,
}

#[derive(Debug, Default)]
struct State {
    queue: VecDeque<(u64, HumanDraft)>,
    next_seq: u64,
    closed: bool,
    waiting: bool,
}

/// FIFO between one producer and one consumer. Clones share the queue.
#[derive(Debug, Clone, Default)]
pub struct HumanBridge {
    inner: Arc<(Mutex<State>, Condvar)>,
}

impl HumanBridge {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.inner.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Queues a draft and returns its sequence number.
    pub fn enqueue(&self, draft: HumanDraft) -> Result<u64, BridgeError> {
        let mut st = self.lock();
        if st.closed {
            return Err(BridgeError::Closed);
        }
        let seq = st.next_seq;
        st.next_seq += 1;
        st.queue.push_back((seq, draft));
        drop(st);
        self.inner.1.notify_all();
        Ok(seq)
    }

    /// Blocks up to `timeout` for the oldest draft. Drafts queued before
    /// `close` are still delivered.
    pub fn dequeue(&self, timeout: Duration) -> Result<(u64, HumanDraft), BridgeError> {
        let deadline = Instant::now() + timeout;
        let mut st = self.lock();
        loop {
            if let Some(item) = st.queue.pop_front() {
                st.waiting = false;
                return Ok(item);
            }
            if st.closed {
                st.waiting = false;
                return Err(BridgeError::Closed);
            }
            let now = Instant::now();
            if now >= deadline {
                st.waiting = false;
                return Err(BridgeError::Timeout);
            }
            st.waiting = true;
            st = self
                .inner
                .1
                .wait_timeout(st, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    pub fn close(&self) {
        self.lock().closed = true;
        self.inner.1.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    /// True while the consumer is blocked on an empty queue.
    pub fn consumer_waiting(&self) -> bool {
        self.lock().waiting
    }

    pub fn len(&self) -> usize {
        self.lock().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Agent whose replies come from a [`HumanBridge`].
#[derive(Debug, Clone)]
pub struct HumanBridgeAgent {
    id: AgentId,
    bridge: HumanBridge,
    timeout: Duration,
}

impl HumanBridgeAgent {
    pub fn new(id: AgentId, bridge: HumanBridge, timeout: Duration) -> Self {
        Self { id, bridge, timeout }
    }

    pub fn bridge(&self) -> &HumanBridge {
        &self.bridge
    }
}

impl Agent for HumanBridgeAgent {
    fn id(&self) -> &AgentId {
        &self.id
    }

    fn respond(&mut self, context: &Context, incoming: &Message) -> Result<Message, AgentError> {
        check_addressed(&self.id, incoming)?;
        let (_, draft) = self.bridge.dequeue(self.timeout).map_err(|e| match e {
            BridgeError::Timeout => AgentError::AwaitingHuman,
            BridgeError::Closed => AgentError::BridgeClosed,
        })?;
        let payload = draft.to_payload(context, Some(incoming))?;
        reply_to(&self.id, incoming, payload)
    }

    fn categorizer_name(&self) -> String {
        "human".to_string()
    }
}

#[cfg(test)]
mod tests {
    use std::thread;

    use proptest::prelude::*;

    use super::*;
    use crate::protocol::{context_at, Background, Interaction};

    fn draft(i: usize) -> HumanDraft {
        HumanDraft::new(HumanInputKind::Statement, format!("m{i}"))
    }

    #[test]
    fn fifo_of_one() {
        let b = HumanBridge::new();
        let seq = b.enqueue(draft(0)).unwrap();
        assert_eq!(b.dequeue(Duration::ZERO).unwrap(), (seq, draft(0)));
    }

    #[test]
    fn empty_queue_times_out() {
        let b = HumanBridge::new();
        assert_eq!(b.dequeue(Duration::ZERO), Err(BridgeError::Timeout));
    }

    #[test]
    fn close_drains_then_fails() {
        let b = HumanBridge::new();
        b.enqueue(draft(1)).unwrap();
        b.close();
        assert_eq!(b.enqueue(draft(2)), Err(BridgeError::Closed));
        assert!(b.dequeue(Duration::ZERO).is_ok());
        assert_eq!(b.dequeue(Duration::from_secs(5)), Err(BridgeError::Closed));
    }

    #[test]
    fn close_wakes_a_blocked_consumer() {
        let b = HumanBridge::new();
        let b2 = b.clone();
        let h = thread::spawn(move || b2.dequeue(Duration::from_secs(30)));
        while !b.consumer_waiting() {
            thread::yield_now();
        }
        b.close();
        assert_eq!(h.join().unwrap(), Err(BridgeError::Closed));
    }

    #[test]
    fn agent_maps_answers_to_counter_question() {
        let h = AgentId::human("h");
        let m = AgentId::machine("m");
        let msgs = [
            Message::new(h.clone(), MessageString::question(1, "Can I claim?"), m.clone()).unwrap(),
            Message::new(m.clone(), MessageString::question(2, "Are you single?"), h.clone()).unwrap(),
        ];
        let i = Interaction::from_messages(h.clone(), m.clone(), msgs.clone()).unwrap();
        let ctx = context_at(&i, &h, 2, &Background::new()).unwrap();
        let bridge = HumanBridge::new();
        let mut agent = HumanBridgeAgent::new(h, bridge.clone(), Duration::ZERO);
        assert_eq!(agent.respond(&ctx, &msgs[1]), Err(AgentError::AwaitingHuman));
        bridge.enqueue(HumanDraft::new(HumanInputKind::Answer, "yes")).unwrap();
        assert_eq!(agent.respond(&ctx, &msgs[1]).unwrap().payload(), &MessageString::answer(2, ["yes"]));
        bridge.enqueue(HumanDraft::new(HumanInputKind::Question, "And now?")).unwrap();
        assert_eq!(agent.respond(&ctx, &msgs[1]).unwrap().payload(), &MessageString::question(3, "And now?"));
        bridge.close();
        assert_eq!(agent.respond(&ctx, &msgs[1]), Err(AgentError::BridgeClosed));
    }

    #[test]
    fn draft_serde() {
        let d: HumanDraft = serde_json::from_str(r#"{"kind":"a","text":"yes"}"#).unwrap();
        assert_eq!(d, HumanDraft::new(HumanInputKind::Answer, "yes"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn interleavings_preserve_order(pauses in prop::collection::vec(0u8..4, 1..40)) {
            let b = HumanBridge::new();
            let producer = b.clone();
            let plan = pauses.clone();
            let h = thread::spawn(move || {
                for (i, p) in plan.iter().enumerate() {
                    for _ in 0..*p {
                        thread::yield_now();
                    }
                    producer.enqueue(draft(i)).unwrap();
                }
            });
            let mut got = Vec::new();
            for (i, p) in pauses.iter().enumerate() {
                if i % 2 == 0 {
                    for _ in 0..(3 - *p) {
                        thread::yield_now();
                    }
                }
                got.push(b.dequeue(Duration::from_secs(10)).unwrap());
            }
            h.join().unwrap();
            for (i, (seq, d)) in got.iter().enumerate() {
                prop_assert_eq!(*seq, i as u64);
                prop_assert_eq!(d, &draft(i));
            }
        }
    }
}
