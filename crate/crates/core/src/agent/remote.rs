//! JSON-over-HTTP backend adapter. Request `{role, prompt, temperature,
//! max_tokens}`, response `{text, input_tokens, output_tokens}`. No streaming.

use std::time::Duration;

use serde::Serialize;

use crate::agent::{Backend, BackendError, BackendRequest, BackendResponse, Role};

pub struct RemoteBackend {
    endpoint: String,
    credential_env: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    role: Role,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

impl RemoteBackend {
    /// `credential_env` names the environment variable holding the bearer
    /// credential; it is read on every call and never stored.
    pub fn new(endpoint: &str, credential_env: Option<&str>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: endpoint.to_string(),
            credential_env: credential_env.map(str::to_string),
            agent,
        }
    }
}

impl Backend for RemoteBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, BackendError> {
        let body = WireRequest {
            role: request.role,
            prompt: request.prompt,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut call = self.agent.post(&self.endpoint);
        if let Some(var) = &self.credential_env {
            let token = std::env::var(var)
                .map_err(|_| BackendError::Unavailable(format!("credential variable {var} is not set")))?;
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) => BackendError::Protocol(format!("HTTP {code}")),
            other => BackendError::Unavailable(other.to_string()),
        })?;
        response
            .body_mut()
            .read_json::<BackendResponse>()
            .map_err(|e| BackendError::Protocol(e.to_string()))
    }
}
