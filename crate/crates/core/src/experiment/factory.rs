//! Agents built from command-line style specs such as `scripted:gold`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::AgentFactory;
use super::ExperimentError;
use crate::agents::{
    Agent, AgentConfig, AgentError, CannedTransport, HttpTransport, LlmAgent, OracleAgent, OracleTable,
    ResponderKind, ScriptedAgent, ScriptedPolicy, Transport,
};
use crate::datasets::DatasetRecord;
use crate::protocol::{AgentId, AgentKind};

pub const INITIATOR_NAME: &str = "h";
pub const RESPONDER_NAME: &str = "m";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AgentSpec {
    Llm,
    Oracle,
    Human,
    /// A built-in policy name or a path to a policy JSON file.
    Scripted(String),
}

impl FromStr for AgentSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(AgentSpec::Llm),
            "oracle" => Ok(AgentSpec::Oracle),
            "human" => Ok(AgentSpec::Human),
            _ => match s.strip_prefix("scripted:") {
                Some(p) if !p.is_empty() => Ok(AgentSpec::Scripted(p.to_string())),
                _ => Err(format!(
                    "unknown agent {s:?} (expected llm, oracle, human or scripted:<policy>)"
                )),
            },
        }
    }
}

impl TryFrom<String> for AgentSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AgentSpec> for String {
    fn from(s: AgentSpec) -> Self {
        s.to_string()
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Llm => f.write_str("llm"),
            AgentSpec::Oracle => f.write_str("oracle"),
            AgentSpec::Human => f.write_str("human"),
            AgentSpec::Scripted(p) => write!(f, "scripted:{p}"),
        }
    }
}

impl AgentSpec {
    pub fn kind(&self) -> AgentKind {
        match self {
            AgentSpec::Llm => AgentKind::Machine,
            AgentSpec::Oracle => AgentKind::Oracle,
            AgentSpec::Human => AgentKind::Human,
            AgentSpec::Scripted(_) => AgentKind::Scripted,
        }
    }
}

/// Loads a built-in policy by name, else a policy JSON file. Relative paths
/// resolve against `base`.
pub fn resolve_policy(name: &str, base: Option<&Path>) -> Result<ScriptedPolicy, ExperimentError> {
    if let Some(p) = ScriptedPolicy::builtin(name) {
        return Ok(p);
    }
    let mut path = PathBuf::from(name);
    if path.is_relative() {
        if let Some(b) = base {
            path = b.join(path);
        }
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ExperimentError::Config(format!("policy {name:?}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("policy {}: {e}", path.display())))
}

/// Everything needed to build the agents of a batch run.
#[derive(Clone)]
pub struct FactoryOptions {
    pub responder: AgentSpec,
    pub clarifier: AgentSpec,
    /// Settings for LLM agents; ignored otherwise.
    pub llm: AgentConfig,
    /// Overrides the environment-configured HTTP transport.
    pub transport: Option<Arc<dyn Transport>>,
    /// Base directory for relative policy paths.
    pub policy_dir: Option<PathBuf>,
}

impl FactoryOptions {
    pub fn new(responder: AgentSpec, clarifier: AgentSpec) -> Self {
        Self {
            responder,
            clarifier,
            llm: AgentConfig::new(ResponderKind::Llm),
            transport: None,
            policy_dir: None,
        }
    }

    /// Uses a canned transport read from `path`.
    pub fn with_canned(mut self, path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("canned completions {}: {e}", path.display())))?;
        let canned = CannedTransport::from_json(&text)
            .map_err(|e| ExperimentError::Config(format!("canned completions {}: {e}", path.display())))?;
        self.transport = Some(Arc::new(canned));
        Ok(self)
    }
}

#[derive(Clone)]
enum Blueprint {
    Llm,
    Oracle(OracleTable),
    Scripted(ScriptedPolicy),
}

/// [`AgentFactory`] for the `llm`, `oracle` and `scripted:<policy>` specs.
#[derive(Clone)]
pub struct SpecFactory {
    initiator: Blueprint,
    responder: Blueprint,
    initiator_id: AgentId,
    responder_id: AgentId,
    llm: AgentConfig,
    transport: Option<Arc<dyn Transport>>,
    description: serde_json::Value,
}

impl fmt::Debug for SpecFactory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpecFactory").field("description", &self.description).finish_non_exhaustive()
    }
}

fn digest(policy: &ScriptedPolicy) -> String {
    let json = serde_json::to_string(policy).expect("policy serializes");
    hex::encode(&Sha256::digest(json.as_bytes())[..8])
}

impl SpecFactory {
    pub fn build(options: FactoryOptions, records: &[DatasetRecord]) -> Result<Self, ExperimentError> {
        let needs_llm = options.responder == AgentSpec::Llm || options.clarifier == AgentSpec::Llm;
        let mut llm = options.llm.clone();
        llm.kind = ResponderKind::Llm;
        let transport = if needs_llm {
            llm.validate().map_err(ExperimentError::Config)?;
            Some(match options.transport.clone() {
                Some(t) => t,
                None => Arc::new(
                    HttpTransport::from_env().map_err(|e| ExperimentError::Config(e.to_string()))?,
                ) as Arc<dyn Transport>,
            })
        } else {
            None
        };
        let dir = options.policy_dir.as_deref();
        let blueprint = |spec: &AgentSpec, role: &str| -> Result<Blueprint, ExperimentError> {
            match spec {
                AgentSpec::Llm => Ok(Blueprint::Llm),
                AgentSpec::Oracle if role == "responder" => Ok(Blueprint::Oracle(OracleTable::from_records(records))),
                AgentSpec::Oracle => Err(ExperimentError::Config("the oracle can only respond".into())),
                AgentSpec::Human => Err(ExperimentError::Config(
                    "human agents take part in live sessions only".into(),
                )),
                AgentSpec::Scripted(name) => Ok(Blueprint::Scripted(resolve_policy(name, dir)?)),
            }
        };
        let initiator = blueprint(&options.clarifier, "initiator")?;
        let responder = blueprint(&options.responder, "responder")?;
        let describe = |spec: &AgentSpec, bp: &Blueprint| match bp {
            Blueprint::Scripted(p) => serde_json::json!({ "spec": spec.to_string(), "policy": digest(p) }),
            _ => serde_json::json!({ "spec": spec.to_string() }),
        };
        let mut description = serde_json::json!({
            "initiator": describe(&options.clarifier, &initiator),
            "responder": describe(&options.responder, &responder),
        });
        if needs_llm {
            description["llm"] = serde_json::json!({
                "model": llm.model,
                "temperature": llm.temperature,
                "template": llm.prompt_template,
                "endpoint": transport.as_ref().map(|t| t.endpoint()),
            });
        }
        Ok(Self {
            initiator,
            responder,
            initiator_id: AgentId::new(INITIATOR_NAME, options.clarifier.kind())?,
            responder_id: AgentId::new(RESPONDER_NAME, options.responder.kind())?,
            llm,
            transport,
            description,
        })
    }

    /// Scripted agents on both sides.
    pub fn scripted(responder: ScriptedPolicy, clarifier: ScriptedPolicy) -> Self {
        let description = serde_json::json!({
            "initiator": { "spec": "scripted", "policy": digest(&clarifier) },
            "responder": { "spec": "scripted", "policy": digest(&responder) },
        });
        Self {
            initiator: Blueprint::Scripted(clarifier),
            responder: Blueprint::Scripted(responder),
            initiator_id: AgentId::scripted(INITIATOR_NAME),
            responder_id: AgentId::scripted(RESPONDER_NAME),
            llm: AgentConfig::new(ResponderKind::Llm),
            transport: None,
            description,
        }
    }

    pub fn initiator_id(&self) -> &AgentId {
        &self.initiator_id
    }

    pub fn responder_id(&self) -> &AgentId {
        &self.responder_id
    }

    fn make(&self, bp: &Blueprint, id: &AgentId, record: &DatasetRecord) -> Result<Box<dyn Agent>, AgentError> {
        let mut agent: Box<dyn Agent> = match bp {
            Blueprint::Llm => {
                let transport = self
                    .transport
                    .clone()
                    .ok_or_else(|| AgentError::Policy("no llm transport configured".into()))?;
                Box::new(LlmAgent::new(id.clone(), &self.llm, transport)?)
            }
            Blueprint::Oracle(table) => Box::new(OracleAgent::new(id.clone(), table.clone())),
            Blueprint::Scripted(policy) => Box::new(ScriptedAgent::new(id.clone(), policy.clone())),
        };
        agent.bind_record(record);
        Ok(agent)
    }
}

impl AgentFactory for SpecFactory {
    fn initiator(&self, record: &DatasetRecord) -> Result<Box<dyn Agent>, AgentError> {
        self.make(&self.initiator, &self.initiator_id, record)
    }

    fn responder(&self, record: &DatasetRecord) -> Result<Box<dyn Agent>, AgentError> {
        self.make(&self.responder, &self.responder_id, record)
    }

    fn describe(&self) -> serde_json::Value {
        self.description.clone()
    }
}
