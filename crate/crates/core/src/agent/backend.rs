use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{CritiqueReport, DraftDecision};
use crate::knowledge::{GuidelineChunk, Submission};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Agent,
    Critic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Draft,
    Critique,
    Revise,
    Chat,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Draft => "draft",
            Task::Critique => "critique",
            Task::Revise => "revise",
            Task::Chat => "chat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub role: Role,
    pub temperature: f64,
    #[serde(default)]
    pub endpoint: Option<String>,
    pub model_name: String,
    pub max_context_tokens: u32,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
}

fn default_max_output_tokens() -> u32 {
    16_384
}

impl BackendConfig {
    pub const AGENT_TEMPERATURE: f64 = 0.2;
    pub const CRITIC_TEMPERATURE: f64 = 0.0;

    pub fn agent_default() -> Self {
        Self {
            role: Role::Agent,
            temperature: Self::AGENT_TEMPERATURE,
            endpoint: None,
            model_name: "scripted".into(),
            max_context_tokens: 200_000,
            max_output_tokens: default_max_output_tokens(),
        }
    }

    pub fn critic_default() -> Self {
        Self {
            role: Role::Critic,
            temperature: Self::CRITIC_TEMPERATURE,
            ..Self::agent_default()
        }
    }

    pub fn for_role(role: Role) -> Self {
        match role {
            Role::Agent => Self::agent_default(),
            Role::Critic => Self::critic_default(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_context_tokens == 0 {
            return Err(GatewayError::Config("max_context_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Structured inputs a prompt was rendered from. Scripted backends read
/// these; the remote backend only sees `BackendRequest::prompt`.
#[derive(Debug, Clone, Copy)]
pub struct CallContext<'a> {
    pub submission: &'a Submission,
    pub guidelines: &'a [GuidelineChunk],
    pub draft: Option<&'a DraftDecision>,
    pub critique: Option<&'a CritiqueReport>,
    pub question: Option<&'a str>,
}

impl<'a> CallContext<'a> {
    pub fn new(submission: &'a Submission, guidelines: &'a [GuidelineChunk]) -> Self {
        Self {
            submission,
            guidelines,
            draft: None,
            critique: None,
            question: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BackendRequest<'a> {
    pub role: Role,
    pub task: Task,
    pub prompt: &'a str,
    pub temperature: f64,
    pub max_tokens: u32,
    /// 0 for the first try, 1 for the retry after a schema violation.
    pub attempt: u32,
    pub context: CallContext<'a>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, BackendError>;
}

/// Rough token count used by scripted backends: one token per four bytes.
pub fn approx_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("endpoint configured for {configured:?} cannot serve as {required:?}")]
    RoleMismatch { configured: Role, required: Role },
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("schema violation: {0}")]
    SchemaViolation(#[from] crate::agent::SchemaViolation),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Clone)]
pub(crate) struct Endpoint {
    pub config: BackendConfig,
    pub backend: Arc<dyn Backend>,
}

impl Endpoint {
    fn new(config: BackendConfig, backend: Arc<dyn Backend>, required: Role) -> Result<Self, GatewayError> {
        if config.role != required {
            return Err(GatewayError::RoleMismatch {
                configured: config.role,
                required,
            });
        }
        config.validate()?;
        Ok(Self { config, backend })
    }
}

/// A backend bound to the primary agent role. Only this type is accepted by
/// draft generation and revision.
#[derive(Clone)]
pub struct AgentEndpoint(pub(crate) Endpoint);

/// A backend bound to the critic role. Only this type is accepted by critique.
#[derive(Clone)]
pub struct CriticEndpoint(pub(crate) Endpoint);

impl AgentEndpoint {
    pub fn new(config: BackendConfig, backend: Arc<dyn Backend>) -> Result<Self, GatewayError> {
        Endpoint::new(config, backend, Role::Agent).map(Self)
    }

    pub fn config(&self) -> &BackendConfig {
        &self.0.config
    }
}

impl CriticEndpoint {
    pub fn new(config: BackendConfig, backend: Arc<dyn Backend>) -> Result<Self, GatewayError> {
        Endpoint::new(config, backend, Role::Critic).map(Self)
    }

    pub fn config(&self) -> &BackendConfig {
        &self.0.config
    }
}

impl std::fmt::Debug for AgentEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("AgentEndpoint").field(&self.0.config).finish()
    }
}

impl std::fmt::Debug for CriticEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("CriticEndpoint").field(&self.0.config).finish()
    }
}
