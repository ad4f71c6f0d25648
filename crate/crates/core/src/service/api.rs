//! HTTP routes. Bodies are JSON; errors are problem-detail documents with a
//! machine-readable `code`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::OUTPUT_SCHEMA;
use crate::evaluation::Pricing;
use crate::governance::{AuditBundle, AuthorizeError, BundleError, ConcurrencyToken, HumanDecision, RecordedOutcome};
use crate::knowledge::Submission;
use crate::service::view::{CaseSummary, CaseView};
use crate::workflow::{CaseState, ChatReply, Engine, EngineError};

/// Reviewer identity stub. When present it must agree with the decision body.
pub const REVIEWER_HEADER: &str = "x-reviewer-id";

pub const OPENAPI: &str = include_str!("../../fixtures/openapi.json");

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ApiOptions {
    pub escalated_first: bool,
    pub pricing: Pricing,
}

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
    options: ApiOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(rename = "type")]
    pub kind: String,
    pub title: String,
    pub status: u16,
    pub code: String,
    pub detail: String,
}

impl Problem {
    pub fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self {
            kind: format!("urn:underwrite:problem:{code}"),
            title: status.canonical_reason().unwrap_or("Error").to_string(),
            status: status.as_u16(),
            code: code.to_string(),
            detail: detail.into(),
        }
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = serde_json::to_vec(&self).unwrap_or_default();
        (status, [(header::CONTENT_TYPE, "application/problem+json")], body).into_response()
    }
}

impl From<EngineError> for Problem {
    fn from(e: EngineError) -> Self {
        let detail = e.to_string();
        let (status, code) = match &e {
            EngineError::UnknownCase(_) => (StatusCode::NOT_FOUND, "unknown_case"),
            EngineError::DuplicateCase(_) => (StatusCode::CONFLICT, "duplicate_case"),
            EngineError::InvalidSubmission(_) => (StatusCode::BAD_REQUEST, "malformed_submission"),
            EngineError::Authorize(a) => match a {
                AuthorizeError::WrongState(_) => (StatusCode::UNPROCESSABLE_ENTITY, "wrong_state"),
                AuthorizeError::StaleCase { .. } => (StatusCode::CONFLICT, "stale_case"),
                AuthorizeError::CaseMismatch { .. } => (StatusCode::BAD_REQUEST, "case_mismatch"),
                AuthorizeError::MissingReviewer => (StatusCode::BAD_REQUEST, "missing_reviewer"),
                AuthorizeError::MissingFinalRecommendation { .. } => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "missing_final_recommendation")
                }
                AuthorizeError::NothingToAccept => (StatusCode::UNPROCESSABLE_ENTITY, "nothing_to_accept"),
                AuthorizeError::InvalidRecommendation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_recommendation"),
                AuthorizeError::Transition(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_transition"),
                AuthorizeError::Ledger(_) => (StatusCode::INTERNAL_SERVER_ERROR, "ledger_failure"),
            },
            EngineError::Transition(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_transition"),
            EngineError::Ledger(_) => (StatusCode::INTERNAL_SERVER_ERROR, "ledger_failure"),
            EngineError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store_failure"),
            EngineError::Chat(_) => (StatusCode::BAD_GATEWAY, "backend_failure"),
        };
        Problem::new(status, code, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub case_id: String,
    pub state: CaseState,
    pub href: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub decision: HumanDecision,
    pub token: ConcurrencyToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub state: CaseState,
    /// None when the reviewer escalated instead of recording.
    pub outcome: Option<RecordedOutcome>,
    /// True when this request repeated an already-recorded decision.
    pub replayed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    pub question: String,
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    state: Option<String>,
}

/// Query-string state names; `awaiting_auth` is shorthand for
/// `awaiting_human_auth`.
pub fn parse_state(raw: &str) -> Option<CaseState> {
    if raw == "awaiting_auth" {
        return Some(CaseState::AwaitingHumanAuth);
    }
    serde_json::from_value(Value::String(raw.to_string())).ok()
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8], code: &str) -> Result<T, Problem> {
    serde_json::from_slice(body).map_err(|e| Problem::new(StatusCode::BAD_REQUEST, code, e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Problem> + Send + 'static) -> Result<T, Problem> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Problem::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn submit_case(State(s): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<SubmitResponse>), Problem> {
    let submission: Submission = parse_body(&body, "malformed_submission")?;
    let case_id = s.engine.accept(submission)?;
    let engine = s.engine.clone();
    let id = case_id.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = engine.process(&id) {
            tracing::error!(case_id = %id, error = %e, "pipeline failed");
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(SubmitResponse {
            href: format!("/cases/{case_id}"),
            case_id,
            state: CaseState::Ingest,
        }),
    ))
}

async fn list_cases(State(s): State<AppState>, Query(q): Query<ListQuery>) -> Result<Json<Vec<CaseSummary>>, Problem> {
    let filter = match q.state.as_deref() {
        None => None,
        Some(raw) => Some(
            parse_state(raw)
                .ok_or_else(|| Problem::new(StatusCode::BAD_REQUEST, "invalid_query", format!("unknown state {raw:?}")))?,
        ),
    };
    let mut rows: Vec<CaseSummary> = s
        .engine
        .list()
        .iter()
        .filter(|d| filter.is_none_or(|st| d.case.state == st))
        .map(CaseSummary::of)
        .collect();
    if s.options.escalated_first {
        rows.sort_by_key(|r| r.state != CaseState::Escalated);
    }
    Ok(Json(rows))
}

async fn get_case(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<CaseView>, Problem> {
    let dossier = s.engine.get(&id).ok_or_else(|| Problem::from(EngineError::UnknownCase(id)))?;
    Ok(Json(CaseView::build(&dossier, &s.engine.context().store, s.options.pricing)))
}

async fn decide(
    State(s): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<DecisionResponse>, Problem> {
    let mut req: DecisionRequest = parse_body(&body, "malformed_request")?;
    if let Some(value) = headers.get(REVIEWER_HEADER) {
        let reviewer = value
            .to_str()
            .map_err(|_| Problem::new(StatusCode::BAD_REQUEST, "malformed_request", "reviewer header is not text"))?;
        if req.decision.reviewer_id.is_empty() {
            req.decision.reviewer_id = reviewer.to_string();
        } else if req.decision.reviewer_id != reviewer {
            return Err(Problem::new(
                StatusCode::FORBIDDEN,
                "reviewer_mismatch",
                format!("decision reviewer {:?} differs from session reviewer {reviewer:?}", req.decision.reviewer_id),
            ));
        }
    }
    let engine = s.engine.clone();
    let auth = blocking(move || Ok(engine.authorize(&id, &req.decision, &req.token)?)).await?;
    Ok(Json(DecisionResponse {
        state: auth.case.state,
        replayed: auth.outcome.is_some() && auth.records.is_empty(),
        outcome: auth.outcome,
    }))
}

async fn chat(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<ChatReply>, Problem> {
    let req: ChatRequest = parse_body(&body, "malformed_request")?;
    if req.question.trim().is_empty() {
        return Err(Problem::new(StatusCode::BAD_REQUEST, "malformed_request", "question is empty"));
    }
    let engine = s.engine.clone();
    let reply = blocking(move || Ok(engine.chat(&id, &req.question)?)).await?;
    Ok(Json(reply))
}

async fn audit(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<AuditBundle>, Problem> {
    if s.engine.get(&id).is_none() {
        return Err(EngineError::UnknownCase(id).into());
    }
    AuditBundle::export(s.engine.ledger(), &id).map(Json).map_err(|e| match e {
        BundleError::UnknownCase(_) => Problem::new(StatusCode::NOT_FOUND, "no_audit_records", e.to_string()),
        other => Problem::new(StatusCode::INTERNAL_SERVER_ERROR, "audit_failure", other.to_string()),
    })
}

fn json_document(raw: &'static str) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], raw).into_response()
}

async fn openapi() -> Response {
    json_document(OPENAPI)
}

async fn output_schema() -> Response {
    json_document(OUTPUT_SCHEMA)
}

async fn health() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn not_found() -> Problem {
    Problem::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(engine: Arc<Engine>, options: ApiOptions) -> Router {
    Router::new()
        .route("/cases", post(submit_case).get(list_cases))
        .route("/cases/{id}", get(get_case))
        .route("/cases/{id}/decision", post(decide))
        .route("/cases/{id}/chat", post(chat))
        .route("/cases/{id}/audit", get(audit))
        .route("/openapi", get(openapi))
        .route("/schema/output", get(output_schema))
        .route("/health", get(health))
        .fallback(not_found)
        .with_state(AppState { engine, options })
}
