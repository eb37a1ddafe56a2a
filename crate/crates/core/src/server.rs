//! HTTP API over the repository, job runner, guide and analyses. Bodies are JSON.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{data_utility, disclosure_risk};
use crate::error::{Error, ParamError};
use crate::guidance::GuideQuery;
use crate::knowledge::KnowledgeKind;
use crate::repo::{Content, EntryKind, JobRunner, JobSpec, RepoEntry};
use crate::stats::variants;

const MAX_UPLOAD: usize = 512 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub runner: Arc<JobRunner>,
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::UnknownEntry(_) | Error::UnknownJob(_) => StatusCode::NOT_FOUND,
        Error::UnknownTechnique(_)
        | Error::ParameterValidation(_)
        | Error::ParseFailure { .. }
        | Error::MalformedXml { .. }
        | Error::SchemaViolation { .. }
        | Error::MalformedAbstraction(_) => StatusCode::BAD_REQUEST,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        let params: &[ParamError] = match &self.0 {
            Error::ParameterValidation(errs) => errs,
            _ => &[],
        };
        let body = json!({
            "error": {
                "code": self.0.code(),
                "message": self.0.to_string(),
                "params": params,
            }
        });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad_param(param: &str, message: &str) -> ApiError {
    ApiError(Error::ParameterValidation(vec![ParamError::new(param, message)]))
}

/// Runs blocking repository or analysis work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, Error> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::InvalidOperation(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/techniques", get(techniques))
        .route("/guide", axum::routing::post(guide))
        .route("/logs", get(list_logs).post(upload_log))
        .route("/logs/{id}", get(show_log).delete(delete_log))
        .route("/logs/{id}/content", get(log_content))
        .route("/logs/{id}/lineage", get(lineage))
        .route("/jobs", axum::routing::post(submit_job))
        .route("/jobs/{id}", get(job_status))
        .route("/analysis/risk", get(risk))
        .route("/analysis/utility", get(utility))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn techniques(State(s): State<AppState>) -> Json<Value> {
    Json(serde_json::to_value(s.runner.registry()).expect("registry serializes"))
}

async fn guide(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let query: GuideQuery = if body.iter().all(u8::is_ascii_whitespace) {
        GuideQuery::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| bad_param("query", &e.to_string()))?
    };
    Ok(Json(json!({ "techniques": s.runner.registry().filter(&query) })))
}

async fn list_logs(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    let repo = s.runner.repository().clone();
    let entries = blocking(move || repo.list()).await?;
    Ok(Json(json!({ "entries": entries })))
}

async fn upload_log(State(s): State<AppState>, mut multipart: Multipart) -> ApiResult<(StatusCode, Json<RepoEntry>)> {
    let mut file: Option<(Option<String>, Bytes)> = None;
    let mut name = None;
    let mut kind = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| bad_param("file", &e.body_text()))?
    {
        let field_name = field.name().unwrap_or_default().to_owned();
        let file_name = field.file_name().map(str::to_owned);
        let data = field.bytes().await.map_err(|e| bad_param(&field_name, &e.body_text()))?;
        match field_name.as_str() {
            "file" => file = Some((file_name, data)),
            "name" => name = Some(String::from_utf8_lossy(&data).into_owned()),
            "kind" => {
                let raw = String::from_utf8_lossy(&data);
                kind = Some(EntryKind::parse(raw.trim()).ok_or_else(|| bad_param("kind", "expected xes or ela"))?);
            }
            _ => return Err(bad_param(&field_name, "unknown form field")),
        }
    }
    let (file_name, data) = file.ok_or_else(|| bad_param("file", "missing file field"))?;
    let kind = kind.unwrap_or_else(|| EntryKind::guess(file_name.as_deref(), &data));
    let name = name.or(file_name).unwrap_or_else(|| format!("upload.{}", kind.as_str()));
    let repo = s.runner.repository().clone();
    let entry = blocking(move || repo.store(&data, kind, &name, &[], None)).await?;
    Ok((StatusCode::CREATED, Json(entry)))
}

#[derive(Serialize)]
struct MetadataLine {
    seq: u32,
    operation_kind: String,
    level: String,
}

fn summary(content: &Content) -> Value {
    match content {
        Content::Log(log) => {
            let records: Vec<MetadataLine> = log
                .privacy_metadata
                .records
                .iter()
                .map(|r| MetadataLine {
                    seq: r.seq,
                    operation_kind: r.operation_kind.to_string(),
                    level: r.level.as_str().to_owned(),
                })
                .collect();
            json!({
                "traces": log.traces.len(),
                "events": log.event_count(),
                "variants": variants(log).len(),
                "activities": log.alphabet(),
                "privacy_metadata": records,
            })
        }
        Content::Abstraction(ela) => json!({
            "abstraction_kind": ela.header.abstraction_kind,
            "technique": ela.header.technique,
            "origin_log_id": ela.header.origin_log_id,
            "columns": ela.columns.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
            "rows": ela.rows.len(),
            "privacy_metadata": ela.header.privacy_metadata.records.len(),
        }),
    }
}

async fn show_log(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let repo = s.runner.repository().clone();
    let (entry, content) = blocking(move || Ok((repo.entry(&id)?, repo.load(&id)?))).await?;
    Ok(Json(json!({ "entry": entry, "summary": summary(&content) })))
}

async fn log_content(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let repo = s.runner.repository().clone();
    let (entry, bytes) = blocking(move || Ok((repo.entry(&id)?, repo.content(&id)?))).await?;
    Ok(([(header::CONTENT_TYPE, entry.kind.media_type())], bytes).into_response())
}

async fn lineage(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let repo = s.runner.repository().clone();
    let lineage = blocking(move || repo.lineage(&id)).await?;
    let depth = lineage.depth();
    let mut body = serde_json::to_value(lineage).expect("lineage serializes");
    body["depth"] = json!(depth);
    Ok(Json(body))
}

async fn delete_log(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RepoEntry>> {
    let repo = s.runner.repository().clone();
    Ok(Json(blocking(move || repo.delete(&id)).await?))
}

async fn submit_job(State(s): State<AppState>, Json(body): Json<Value>) -> ApiResult<(StatusCode, Json<Value>)> {
    let spec: JobSpec = serde_json::from_value(body).map_err(|e| bad_param("job", &e.to_string()))?;
    let runner = s.runner.clone();
    let status = blocking(move || {
        let id = runner.submit(spec)?;
        runner.status(&id)
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(serde_json::to_value(status).expect("status serializes"))))
}

async fn job_status(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let status = s.runner.status(&id)?;
    Ok(Json(serde_json::to_value(status).expect("status serializes")))
}

#[derive(Deserialize)]
struct RiskQuery {
    log: Option<String>,
    kind: Option<String>,
    l: Option<String>,
}

async fn risk(State(s): State<AppState>, Query(q): Query<RiskQuery>) -> ApiResult<Json<Value>> {
    let id = q.log.ok_or_else(|| bad_param("log", "required"))?;
    let kind = match q.kind.as_deref() {
        None | Some("") => KnowledgeKind::Set,
        Some(k) => KnowledgeKind::parse(k).ok_or_else(|| bad_param("kind", "expected set, multiset or subsequence"))?,
    };
    let l = match q.l.as_deref() {
        None | Some("") => 1,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|l| *l >= 1)
            .ok_or_else(|| bad_param("l", "must be a positive integer"))?,
    };
    let repo = s.runner.repository().clone();
    let report = blocking(move || disclosure_risk(&repo.load_log(&id)?, kind, l)).await?;
    Ok(Json(serde_json::to_value(report).expect("report serializes")))
}

async fn utility(State(s): State<AppState>, Query(q): Query<BTreeMap<String, String>>) -> ApiResult<Json<Value>> {
    let original = q.get("original").cloned().ok_or_else(|| bad_param("original", "required"))?;
    let anonymized = q.get("anonymized").cloned().ok_or_else(|| bad_param("anonymized", "required"))?;
    let repo = s.runner.repository().clone();
    let report = blocking(move || Ok(data_utility(&repo.load_log(&original)?, &repo.load_log(&anonymized)?))).await?;
    Ok(Json(serde_json::to_value(report).expect("report serializes")))
}
