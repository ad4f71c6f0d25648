//! Replay backend: responses come from scenario fixture files keyed by
//! submission id, task and attempt.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agent::{approx_tokens, Backend, BackendError, BackendRequest, BackendResponse, Task};
use crate::governance::canonical_json;
use crate::knowledge::Submission;

pub const BUNDLED_SCENARIOS: [(&str, &str); 4] = [
    ("case-A-wiring", include_str!("../../fixtures/scenarios/case-A-wiring.json")),
    ("case-B-liquor", include_str!("../../fixtures/scenarios/case-B-liquor.json")),
    ("clean-renewal", include_str!("../../fixtures/scenarios/clean-renewal.json")),
    ("malformed-twice", include_str!("../../fixtures/scenarios/malformed-twice.json")),
];

/// A scenario fixture. Each response list is indexed by attempt; the last
/// entry repeats for later attempts. A string entry is sent verbatim, any
/// other JSON value is sent as its canonical serialisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scenario_id: String,
    #[serde(default)]
    pub description: String,
    pub submission: Submission,
    pub responses: BTreeMap<Task, Vec<Value>>,
}

impl Scenario {
    pub fn from_json(raw: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(raw)
    }

    pub fn bundled(id: &str) -> Option<Scenario> {
        BUNDLED_SCENARIOS
            .iter()
            .find(|(name, _)| *name == id)
            .map(|(_, raw)| Scenario::from_json(raw).expect("bundled scenario parses"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct FixtureBackend {
    scenarios: BTreeMap<String, Scenario>,
}

impl FixtureBackend {
    pub fn new(scenarios: impl IntoIterator<Item = Scenario>) -> Self {
        Self {
            scenarios: scenarios
                .into_iter()
                .map(|s| (s.submission.submission_id.clone(), s))
                .collect(),
        }
    }

    pub fn bundled() -> Self {
        Self::new(BUNDLED_SCENARIOS.iter().map(|(_, raw)| Scenario::from_json(raw).expect("bundled scenario parses")))
    }

    /// Loads every `*.json` scenario in a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut scenarios = Vec::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            let raw = std::fs::read_to_string(&p)?;
            let s = Scenario::from_json(&raw).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", p.display()))
            })?;
            scenarios.push(s);
        }
        Ok(Self::new(scenarios))
    }

    pub fn scenario(&self, submission_id: &str) -> Option<&Scenario> {
        self.scenarios.get(submission_id)
    }
}

fn default_chat(request: &BackendRequest<'_>) -> String {
    let citations: Vec<Value> = request
        .context
        .draft
        .and_then(|d| d.supporting_facts.first())
        .map(|f| f.citations.iter().map(|c| json!(c)).collect())
        .unwrap_or_default();
    let answer = match request.context.draft {
        Some(d) => format!(
            "The draft recommends {} with confidence {:.2}; the first supporting fact is cited below.",
            d.recommendation, d.confidence
        ),
        None => "No draft was produced for this case; it was referred to a human underwriter.".to_string(),
    };
    canonical_json(&json!({ "answer": answer, "citations": citations }))
}

impl Backend for FixtureBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, BackendError> {
        let id = &request.context.submission.submission_id;
        let scenario = self
            .scenarios
            .get(id)
            .ok_or_else(|| BackendError::Unavailable(format!("no fixture for submission {id:?}")))?;
        let text = match scenario.responses.get(&request.task) {
            Some(list) if !list.is_empty() => {
                let entry = &list[(request.attempt as usize).min(list.len() - 1)];
                match entry {
                    Value::String(s) => s.clone(),
                    other => canonical_json(other),
                }
            }
            _ if request.task == Task::Chat => default_chat(request),
            _ => {
                return Err(BackendError::Unavailable(format!(
                    "fixture {id:?} has no {} response",
                    request.task.as_str()
                )))
            }
        };
        Ok(BackendResponse {
            input_tokens: approx_tokens(request.prompt),
            output_tokens: approx_tokens(&text),
            text,
        })
    }
}
