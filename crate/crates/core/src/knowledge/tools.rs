//! Read-only tool registry. Tools take JSON input and return JSON output; they
//! receive no handle to submission data, the corpus or any system of record.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::governance::{canonical_json, AuditEventKind, AuditLedger, LedgerError};
use crate::knowledge::{retrieve_guidelines, RetrievalStore};

/// The only mutability a tool can declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutability {
    ReadOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub mutability: Mutability,
    pub input_schema: String,
    pub output_schema: String,
}

impl ToolSpec {
    pub fn read_only(name: &str, description: &str, input_schema: &str, output_schema: &str) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            mutability: Mutability::ReadOnly,
            input_schema: input_schema.into(),
            output_schema: output_schema.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("tool {0:?} is already registered")]
    DuplicateName(String),
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("invalid input for {tool:?}: {reason}")]
    InvalidInput { tool: String, reason: String },
    #[error("tool {tool:?} failed: {reason}")]
    Failed { tool: String, reason: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

type ToolFn = Box<dyn Fn(&Value) -> Result<Value, String> + Send + Sync>;

struct RegisteredTool {
    spec: ToolSpec,
    run: ToolFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallResult {
    /// Citable id, stable for a given (case, tool, input).
    pub call_id: String,
    pub tool: String,
    pub output: Value,
    /// Canonical JSON of `output`; the text a `ToolResult` citation quotes.
    pub output_text: String,
}

#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, RegisteredTool>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(
        &mut self,
        spec: ToolSpec,
        run: F,
        ledger: &AuditLedger,
    ) -> Result<(), ToolError>
    where
        F: Fn(&Value) -> Result<Value, String> + Send + Sync + 'static,
    {
        if self.tools.contains_key(&spec.name) {
            return Err(ToolError::DuplicateName(spec.name));
        }
        ledger.append(
            AuditLedger::SYSTEM_SCOPE,
            AuditEventKind::ToolCall,
            json!({ "op": "register", "spec": spec }),
        )?;
        self.tools.insert(
            spec.name.clone(),
            RegisteredTool {
                spec,
                run: Box::new(run),
            },
        );
        Ok(())
    }

    pub fn specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values().map(|t| &t.spec)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    /// Runs a tool and logs inputs and outputs (or the failure) to the ledger.
    pub fn invoke(
        &self,
        ledger: &AuditLedger,
        case_id: &str,
        name: &str,
        input: &Value,
    ) -> Result<ToolCallResult, ToolError> {
        let tool = self
            .tools
            .get(name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        let call_id = call_id(case_id, name, input);
        match (tool.run)(input) {
            Ok(output) => {
                let output_text = canonical_json(&output);
                ledger.append(
                    case_id,
                    AuditEventKind::ToolCall,
                    json!({ "op": "invoke", "call_id": call_id, "tool": name, "input": input, "output": output }),
                )?;
                Ok(ToolCallResult {
                    call_id,
                    tool: name.to_string(),
                    output,
                    output_text,
                })
            }
            Err(reason) => {
                ledger.append(
                    case_id,
                    AuditEventKind::ToolCall,
                    json!({ "op": "invoke", "call_id": call_id, "tool": name, "input": input, "error": reason }),
                )?;
                Err(ToolError::Failed {
                    tool: name.to_string(),
                    reason,
                })
            }
        }
    }
}

fn call_id(case_id: &str, tool: &str, input: &Value) -> String {
    let digest = Sha256::digest(canonical_json(input).as_bytes());
    format!("{case_id}:{tool}:{}", hex::encode(&digest[..6]))
}

const LOCATION_FIXTURE: &str = include_str!("../../fixtures/location_risk.json");
const ACCOUNT_FIXTURE: &str = include_str!("../../fixtures/account_history.json");

/// Registry with the fixture-backed tools: `location_risk`, `account_history`
/// and `guideline_search`.
pub fn fixture_registry(
    store: Arc<RetrievalStore>,
    ledger: &AuditLedger,
) -> Result<ToolRegistry, ToolError> {
    let mut registry = ToolRegistry::new();

    let locations: BTreeMap<String, Value> =
        serde_json::from_str(LOCATION_FIXTURE).expect("bundled location fixture is valid");
    registry.register(
        ToolSpec::read_only(
            "location_risk",
            "Flood zone, crime decile and wildfire score for a ZIP code",
            "{\"zip\": string}",
            "{\"zip\": string, \"flood_zone\": string, \"crime_decile\": integer, \"wildfire_score\": integer}",
        ),
        move |input| {
            let zip = input
                .get("zip")
                .and_then(Value::as_str)
                .ok_or("missing string field \"zip\"")?;
            locations
                .get(zip)
                .cloned()
                .map(|mut v| {
                    v["zip"] = json!(zip);
                    v
                })
                .ok_or_else(|| format!("no location data for {zip}"))
        },
        ledger,
    )?;

    let accounts: BTreeMap<String, Value> =
        serde_json::from_str(ACCOUNT_FIXTURE).expect("bundled account fixture is valid");
    registry.register(
        ToolSpec::read_only(
            "account_history",
            "Historical account data for a named insured",
            "{\"insured\": string}",
            "{\"insured\": string, \"years_insured\": integer, \"prior_claims\": integer}",
        ),
        move |input| {
            let insured = input
                .get("insured")
                .and_then(Value::as_str)
                .ok_or("missing string field \"insured\"")?;
            Ok(accounts
                .get(insured)
                .cloned()
                .unwrap_or_else(|| json!({ "insured": insured, "years_insured": 0, "prior_claims": 0 })))
        },
        ledger,
    )?;

    registry.register(
        ToolSpec::read_only(
            "guideline_search",
            "Ranked guideline sections for a free-text query",
            "{\"query\": string, \"k\": integer}",
            "{\"results\": [{\"chunk_id\": string, \"section_label\": string, \"score\": number}]}",
        ),
        move |input| {
            let query = input
                .get("query")
                .and_then(Value::as_str)
                .ok_or("missing string field \"query\"")?;
            let k = input.get("k").and_then(Value::as_u64).unwrap_or(3).max(1) as usize;
            let ranked = retrieve_guidelines(query, &store, k).map_err(|e| e.to_string())?;
            Ok(json!({
                "results": ranked
                    .into_iter()
                    .map(|(c, s)| json!({ "chunk_id": c.chunk_id, "section_label": c.section_label, "score": s }))
                    .collect::<Vec<_>>()
            }))
        },
        ledger,
    )?;

    Ok(registry)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> AuditLedger {
        AuditLedger::in_memory()
    }

    #[test]
    fn registration_is_logged() {
        let ledger = ledger();
        let mut registry = ToolRegistry::new();
        registry
            .register(
                ToolSpec::read_only("location_risk", "d", "{}", "{}"),
                |_| Ok(json!({})),
                &ledger,
            )
            .unwrap();
        assert!(registry.contains("location_risk"));
        let records = ledger.records();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].event_kind, AuditEventKind::ToolCall);
        assert_eq!(records[0].payload["op"], "register");
    }

    #[test]
    fn duplicate_name_is_rejected() {
        let ledger = ledger();
        let mut registry = ToolRegistry::new();
        let spec = ToolSpec::read_only("t", "d", "{}", "{}");
        registry.register(spec.clone(), |_| Ok(json!(1)), &ledger).unwrap();
        let err = registry.register(spec, |_| Ok(json!(2)), &ledger).unwrap_err();
        assert!(matches!(err, ToolError::DuplicateName(n) if n == "t"));
    }

    #[test]
    fn invocation_logs_input_and_output() {
        let ledger = ledger();
        let registry =
            fixture_registry(Arc::new(RetrievalStore::default_corpus()), &ledger).unwrap();
        let result = registry
            .invoke(&ledger, "case-1", "location_risk", &json!({ "zip": "78701" }))
            .unwrap();
        assert_eq!(result.output["zip"], "78701");
        let last = ledger.records().pop().unwrap();
        assert_eq!(last.case_id, "case-1");
        assert_eq!(last.payload["output"], result.output);
        assert_eq!(last.payload["call_id"], result.call_id);
    }

    #[test]
    fn failures_are_logged_too() {
        let ledger = ledger();
        let registry =
            fixture_registry(Arc::new(RetrievalStore::default_corpus()), &ledger).unwrap();
        let err = registry
            .invoke(&ledger, "case-1", "location_risk", &json!({ "zip": "00000" }))
            .unwrap_err();
        assert!(matches!(err, ToolError::Failed { .. }));
        assert!(ledger.records().pop().unwrap().payload.get("error").is_some());
    }

    #[test]
    fn call_ids_are_stable() {
        let a = call_id("c", "t", &json!({ "b": 1, "a": 2 }));
        let b = call_id("c", "t", &json!({ "a": 2, "b": 1 }));
        assert_eq!(a, b);
    }

    #[test]
    fn write_mutability_is_unrepresentable() {
        // `Mutability` has one variant; this match would stop compiling if a
        // second were added.
        match Mutability::ReadOnly {
            Mutability::ReadOnly => {}
        }
        for attempt in ["\"read_write\"", "\"write\"", "\"mutating\""] {
            assert!(serde_json::from_str::<Mutability>(attempt).is_err());
        }
        let spec = serde_json::from_value::<ToolSpec>(json!({
            "name": "x", "description": "d", "mutability": "read_write",
            "input_schema": "{}", "output_schema": "{}"
        }));
        assert!(spec.is_err());
    }

    #[test]
    fn public_surface_has_no_mutating_operations() {
        // API-surface audit: every public fn in this module and in the
        // retrieval store is enumerated here. Adding one fails the test until
        // it is reviewed.
        let allowed = [
            "read_only", "new", "register", "specs", "contains", "invoke", "fixture_registry",
        ];
        let source = include_str!("tools.rs");
        let found = public_fns(source);
        for name in &found {
            assert!(allowed.contains(&name.as_str()), "unreviewed public fn {name}");
        }
        let retrieval = public_fns(include_str!("retrieval.rs"));
        let retrieval_allowed = [
            "new", "from_json", "default_corpus", "chunk", "chunks", "len", "is_empty",
            "retrieve_with", "retrieve_guidelines",
        ];
        for name in &retrieval {
            assert!(retrieval_allowed.contains(&name.as_str()), "unreviewed public fn {name}");
        }
        for name in found.iter().chain(&retrieval) {
            for verb in ["write", "update", "delete", "remove", "insert", "bind", "set_", "push", "clear"] {
                assert!(!name.contains(verb), "mutating-looking fn {name}");
            }
        }
    }

    fn public_fns(source: &str) -> Vec<String> {
        source
            .lines()
            .map(str::trim_start)
            .take_while(|l| !l.starts_with("#[cfg(test)]"))
            .filter_map(|l| l.strip_prefix("pub fn "))
            .map(|rest| rest.split(['(', '<']).next().unwrap_or("").to_string())
            .collect()
    }
}
