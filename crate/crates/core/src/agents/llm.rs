//! Chat-completion backed agent.

use std::fmt;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_addressed, opens_turn, reply_to, Agent, AgentConfig, AgentError};
use crate::classifier::{Categorizer, RuleCategorizer, UtteranceCategory};
use crate::protocol::{AgentId, Context, Message, MessageString};

pub const LLM_URL_ENV: &str = "DIALOGGATE_LLM_URL";
pub const LLM_KEY_ENV: &str = "DIALOGGATE_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// All message contents joined, used for canned matching.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("transport not configured: {0}")]
    Config(String),
}

impl TransportError {
    /// Client errors other than 429 are final.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Network(_) => true,
            TransportError::Decode(_) | TransportError::Config(_) => false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;

    /// Endpoint description for logs. Never includes credentials.
    fn endpoint(&self) -> String;
}

/// OpenAI-compatible `POST {base}/chat/completions`.
pub struct HttpTransport {
    url: String,
    key: Option<String>,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpTransport")
            .field("url", &self.url)
            .field("key", &self.key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpTransport {
    pub fn new(base_url: &str, key: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let base = base_url.trim_end_matches('/');
        if base.is_empty() {
            return Err(TransportError::Config("empty base url".into()));
        }
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Config(e.to_string()))?;
        Ok(Self { url, key, client })
    }

    /// Reads the base URL and key from the environment.
    pub fn from_env() -> Result<Self, TransportError> {
        let url = std::env::var(LLM_URL_ENV)
            .map_err(|_| TransportError::Config(format!("{LLM_URL_ENV} is not set")))?;
        let key = std::env::var(LLM_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(&url, key, Duration::from_secs(60))
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl Transport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut call = self.client.post(&self.url).json(request);
        if let Some(key) = &self.key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| TransportError::Network(e.without_url().to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let body: CompletionBody =
            serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportError::Decode("no choices".into()))
    }

    fn endpoint(&self) -> String {
        self.url.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CannedRule {
    pub contains: String,
    pub completion: String,
}

/// Offline transport: the first rule whose `contains` occurs in the prompt
/// supplies the completion. Temperature is ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CannedTransport {
    #[serde(default)]
    pub rules: Vec<CannedRule>,
    pub default: String,
}

impl CannedTransport {
    pub fn new(rules: Vec<CannedRule>, default: impl Into<String>) -> Self {
        Self {
            rules,
            default: default.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl Transport for CannedTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let prompt = request.prompt_text();
        Ok(self
            .rules
            .iter()
            .find(|r| prompt.contains(&r.contains))
            .map_or(&self.default, |r| &r.completion)
            .clone())
    }

    fn endpoint(&self) -> String {
        "canned".to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            base_delay: Duration::ZERO,
        }
    }

    /// Runs `call` until it succeeds, fails permanently or attempts run out.
    /// Returns the outcome and the number of attempts made.
    pub fn run<T>(
        &self,
        mut call: impl FnMut() -> Result<T, TransportError>,
    ) -> (Result<T, TransportError>, u32) {
        let attempts = self.attempts.max(1);
        let mut n = 0;
        loop {
            n += 1;
            match call() {
                Ok(v) => return (Ok(v), n),
                Err(e) if n < attempts && e.is_retryable() => {
                    let delay = self.base_delay.saturating_mul(1 << (n - 1).min(16));
                    tracing::warn!(attempt = n, error = %e, "llm call failed, retrying");
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                }
                Err(e) => return (Err(e), n),
            }
        }
    }
}

/// Versioned prompt with `{instructions}`, `{background}`, `{transcript}`
/// and `{question}` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub instructions: String,
    pub body: String,
}

impl PromptTemplate {
    pub const DEFAULT_ID: &'static str = "qa-v1";

    pub fn qa_v1() -> Self {
        Self {
            id: Self::DEFAULT_ID.to_string(),
            instructions: "You are taking part in a conversation. Answer the question you are asked. \
                If the question cannot be answered as posed, ask one clarifying question instead. \
                Reply with a single utterance."
                .to_string(),
            body: "{instructions}\n\nBackground:\n{background}\n\nConversation so far:\n{transcript}\n\nInitial question: {question}\nYour reply:".to_string(),
        }
    }

    pub fn by_id(id: &str) -> Option<Self> {
        (id == Self::DEFAULT_ID).then(Self::qa_v1)
    }

    pub fn render(&self, context: &Context) -> Vec<ChatMessage> {
        let background = if context.background().is_empty() {
            "(none)".to_string()
        } else {
            context
                .background()
                .statements()
                .iter()
                .map(|s| format!("- {s}"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let transcript = context
            .visible_messages()
            .iter()
            .map(|m| {
                let who = if m.sender() == context.agent() { "you" } else { m.sender().name() };
                let text = match m.payload() {
                    MessageString::Termination => "(ends the conversation)".to_string(),
                    p => p.texts().join(" | "),
                };
                format!("{who}: {text}")
            })
            .collect::<Vec<_>>()
            .join("\n");
        let body = self
            .body
            .replace("{instructions}", &self.instructions)
            .replace("{background}", &background)
            .replace("{transcript}", &transcript)
            .replace("{question}", context.initial_question().unwrap_or(""));
        vec![ChatMessage::new("user", body)]
    }
}

/// One transport exchange, written to the transcript sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeLog {
    pub agent: String,
    pub turn: usize,
    pub endpoint: String,
    pub template: String,
    pub request: ChatRequest,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<UtteranceCategory>,
}

pub struct LlmAgent {
    id: AgentId,
    model: String,
    temperature: f64,
    template: PromptTemplate,
    transport: Arc<dyn Transport>,
    categorizer: Arc<dyn Categorizer>,
    retry: RetryPolicy,
    log: Vec<ExchangeLog>,
}

impl fmt::Debug for LlmAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmAgent")
            .field("id", &self.id)
            .field("model", &self.model)
            .field("endpoint", &self.transport.endpoint())
            .finish_non_exhaustive()
    }
}

impl LlmAgent {
    pub fn new(id: AgentId, config: &AgentConfig, transport: Arc<dyn Transport>) -> Result<Self, AgentError> {
        config.validate().map_err(AgentError::Policy)?;
        let template = PromptTemplate::by_id(&config.prompt_template)
            .ok_or_else(|| AgentError::Policy(format!("unknown prompt template {:?}", config.prompt_template)))?;
        let mut categorizer = RuleCategorizer::default();
        if !config.refusal_phrases.is_empty() {
            categorizer = categorizer.with_refusal_phrases(config.refusal_phrases.iter().cloned());
        }
        Ok(Self {
            id,
            model: config.model.clone().unwrap_or_default(),
            temperature: config.temperature,
            template,
            transport,
            categorizer: Arc::new(categorizer),
            retry: RetryPolicy::default(),
            log: Vec::new(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_categorizer(mut self, categorizer: Arc<dyn Categorizer>) -> Self {
        self.categorizer = categorizer;
        self
    }

    /// Turns a raw completion into a payload that fits the agent's position.
    fn to_payload(&self, context: &Context, completion: &str) -> (UtteranceCategory, MessageString) {
        let text = completion.trim();
        let pending = context.pending_question_for_me().map(|(id, _)| id);
        let mut category = if text.is_empty() {
            UtteranceCategory::TerminationLike
        } else {
            self.categorizer.categorize(text, pending.is_some())
        };
        // a turn may not open with a termination
        if category == UtteranceCategory::TerminationLike && opens_turn(context) {
            category = UtteranceCategory::StatementLike;
        }
        let text = if text.is_empty() { "..." } else { text };
        let payload = match (category, pending) {
            (UtteranceCategory::QuestionLike, _) => MessageString::question(context.next_question_id().0, text),
            (UtteranceCategory::AnswerLike, Some(id)) => MessageString::answer(id.0, [text]),
            (UtteranceCategory::TerminationLike, _) => MessageString::Termination,
            _ => MessageString::statement([text]),
        };
        (category, payload)
    }
}

impl Agent for LlmAgent {
    fn id(&self) -> &AgentId {
        &self.id
    }

    fn respond(&mut self, context: &Context, incoming: &Message) -> Result<Message, AgentError> {
        check_addressed(&self.id, incoming)?;
        let request = ChatRequest {
            model: self.model.clone(),
            temperature: self.temperature,
            messages: self.template.render(context),
        };
        let (outcome, attempts) = self.retry.run(|| self.transport.complete(&request));
        let mut entry = ExchangeLog {
            agent: self.id.name().to_string(),
            turn: context.turn_index(),
            endpoint: self.transport.endpoint(),
            template: self.template.id.clone(),
            request,
            attempts,
            completion: None,
            error: None,
            category: None,
        };
        match outcome {
            Ok(completion) => {
                let (category, payload) = self.to_payload(context, &completion);
                entry.completion = Some(completion);
                entry.category = Some(category);
                self.log.push(entry);
                reply_to(&self.id, incoming, payload)
            }
            Err(e) => {
                entry.error = Some(e.to_string());
                self.log.push(entry);
                Err(AgentError::Transport {
                    attempts,
                    message: e.to_string(),
                })
            }
        }
    }

    fn take_log(&mut self) -> Vec<ExchangeLog> {
        std::mem::take(&mut self.log)
    }

    fn categorizer_name(&self) -> String {
        self.categorizer.name()
    }
}
