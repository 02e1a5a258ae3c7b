//! JSON HTTP API over the engine.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use greenval_core::io::{bundled, bundled_ids, emit_report, CaseStudyDocument, Format, LoadError};
use serde::Serialize;
use tower_http::cors::CorsLayer;

use crate::engine::{self, EngineError, Operation, RunParams};

/// Request bodies above this size are rejected with 413.
pub const BODY_LIMIT: usize = 1 << 20;

/// Datasets the service can serve by id; read-only after startup.
#[derive(Debug, Default)]
pub struct Registry {
    docs: Vec<CaseStudyDocument>,
}

impl Registry {
    pub fn bundled() -> Self {
        let docs = bundled_ids()
            .into_iter()
            .map(|id| bundled(id).expect("listed id").expect("bundled datasets are valid"))
            .collect();
        Registry { docs }
    }

    /// Adds a document, replacing any with the same id.
    pub fn insert(&mut self, doc: CaseStudyDocument) {
        self.docs.retain(|d| d.id() != doc.id());
        self.docs.push(doc);
    }

    pub fn ids(&self) -> Vec<&str> {
        self.docs.iter().map(CaseStudyDocument::id).collect()
    }

    pub fn get(&self, id: &str) -> Option<&CaseStudyDocument> {
        self.docs.iter().find(|d| d.id() == id)
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match &e {
            EngineError::UnknownDataset(_) => (StatusCode::NOT_FOUND, "unknown_dataset"),
            EngineError::Load(LoadError::Parse { .. }) => (StatusCode::BAD_REQUEST, "parse_error"),
            EngineError::Load(LoadError::UnknownVariant(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_variant"),
            EngineError::Load(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_dataset"),
            EngineError::UnknownScenario(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_scenario"),
            EngineError::Scenario(_) | EngineError::Sensitivity(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation_error"),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code,
            message: self.message,
        };
        (self.status, axum::Json(body)).into_response()
    }
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

type Shared = Arc<Registry>;

async fn list(State(reg): State<Shared>) -> Response {
    axum::Json(reg.ids()).into_response()
}

async fn show(State(reg): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let doc = reg.get(&id).ok_or(EngineError::UnknownDataset(id))?;
    Ok(json_bytes(doc.to_json()))
}

/// Splits a request body into the dataset reference and the run parameters.
fn parse_request(reg: &Registry, body: &[u8]) -> Result<(CaseStudyDocument, RunParams), ApiError> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))?;
    let serde_json::Value::Object(mut fields) = value else {
        return Err(ApiError::bad_request("request body must be a JSON object"));
    };
    let dataset = fields
        .remove("dataset")
        .ok_or_else(|| ApiError::bad_request("missing field `dataset`"))?;
    let params: RunParams = serde_json::from_value(serde_json::Value::Object(fields))
        .map_err(|e| ApiError::bad_request(format!("invalid parameters: {e}")))?;
    let doc = match &dataset {
        serde_json::Value::String(id) => reg.get(id).cloned().ok_or(EngineError::UnknownDataset(id.clone()))?,
        serde_json::Value::Object(_) => engine::inline_dataset(&dataset)?,
        _ => return Err(ApiError::bad_request("`dataset` must be an id string or an inline document")),
    };
    Ok((doc, params))
}

async fn operate(reg: Shared, op: Operation, body: Bytes) -> Result<Response, ApiError> {
    let out = tokio::task::spawn_blocking(move || {
        let (doc, params) = parse_request(&reg, &body)?;
        let report = engine::run(op, &doc, &params)?;
        Ok::<_, ApiError>(emit_report(&report, Format::Json))
    })
    .await
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: e.to_string(),
    })??;
    Ok(json_bytes(out))
}

pub fn router(registry: Registry) -> Router {
    let shared: Shared = Arc::new(registry);
    Router::new()
        .route("/api/case-studies", get(list))
        .route("/api/case-studies/{id}", get(show))
        .route(
            "/api/evaluate",
            post(|State(r): State<Shared>, b: Bytes| operate(r, Operation::Evaluate, b)),
        )
        .route(
            "/api/compare",
            post(|State(r): State<Shared>, b: Bytes| operate(r, Operation::Compare, b)),
        )
        .route("/api/sweep", post(|State(r): State<Shared>, b: Bytes| operate(r, Operation::Sweep, b)))
        .route(
            "/api/forecast",
            post(|State(r): State<Shared>, b: Bytes| operate(r, Operation::Forecast, b)),
        )
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(CorsLayer::permissive())
        .with_state(shared)
}

pub async fn serve(registry: Registry, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("greenval listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(registry)).await
}
