//! Read-only HTTP/1.1 JSON API over an immutable knowledge base.
//!
//! | route                   | response                          |
//! |-------------------------|-----------------------------------|
//! | `GET /api/search`       | [`ApiSearchResponse`]             |
//! | `GET /api/departments`  | `[{id, name}]`                    |
//! | `GET /api/employees/{id}` | employee card or 404            |
//! | `GET /api/health`       | `{status, kb_fingerprint}`        |

use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use ontosearch_core::{KnowledgeBase, Orchestrator, QueryError, RawQuery, ScoringParams, SearchResponse};
use serde::{Deserialize, Serialize};

pub const JSON_CONTENT_TYPE: &str = "application/json; charset=utf-8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiBestCase {
    pub case_id: String,
    pub similarity: f64,
    pub confidence: f64,
    pub department_modifier: f64,
    pub factor: f64,
    pub peers: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResult {
    pub employee_id: String,
    pub full_name: String,
    pub phone: String,
    pub email: String,
    pub position_title: String,
    pub department: String,
    pub score: f64,
    pub matched_concepts: Vec<String>,
    pub explanation: String,
    pub best_case: ApiBestCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiTraceEvent {
    pub stage: String,
    pub summary: String,
}

/// Wire form of a search response. Stage timings are left out so the same
/// request always serializes to the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSearchResponse {
    pub request_id: String,
    pub results: Vec<ApiResult>,
    pub unknown_terms: Vec<String>,
    pub department_key: Option<String>,
    pub diagnostics: Vec<String>,
    pub trace: Vec<ApiTraceEvent>,
}

impl From<SearchResponse> for ApiSearchResponse {
    fn from(resp: SearchResponse) -> Self {
        Self {
            request_id: resp.request_id,
            results: resp
                .results
                .into_iter()
                .map(|r| ApiResult {
                    employee_id: r.employee_id,
                    full_name: r.full_name,
                    phone: r.phone,
                    email: r.email,
                    position_title: r.position_title,
                    department: r.department_id,
                    score: r.score,
                    matched_concepts: r
                        .best_case
                        .matched_concepts
                        .iter()
                        .map(|c| c.as_str().to_owned())
                        .collect(),
                    explanation: r.explanation,
                    best_case: ApiBestCase {
                        case_id: r.best_case.case_id,
                        similarity: r.best_case.similarity,
                        confidence: r.best_case.confidence,
                        department_modifier: r.best_case.department_modifier,
                        factor: r.best_case.factor,
                        peers: r.best_case.peers,
                    },
                })
                .collect(),
            unknown_terms: resp.unknown_terms,
            department_key: resp.department_key,
            diagnostics: resp.diagnostics,
            trace: resp
                .trace
                .into_iter()
                .map(|e| ApiTraceEvent {
                    stage: e.stage.to_string(),
                    summary: e.summary,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub error: ApiErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepartmentEntry {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmployeeCard {
    pub id: String,
    pub full_name: String,
    pub phone: String,
    pub email: String,
    pub position_title: String,
    pub department_id: String,
    pub department: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub kb_fingerprint: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct SearchParams {
    pub q: Option<String>,
    pub dept: Option<String>,
    pub k: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    orchestrator: Arc<Orchestrator>,
    cors_allowed_origin: Option<HeaderValue>,
}

impl AppState {
    pub fn new(kb: Arc<KnowledgeBase>, params: ScoringParams, cors_allowed_origin: Option<&str>) -> Self {
        Self {
            orchestrator: Arc::new(Orchestrator::new(kb, params)),
            cors_allowed_origin: cors_allowed_origin.and_then(|o| HeaderValue::from_str(o).ok()),
        }
    }

    fn kb(&self) -> &KnowledgeBase {
        self.orchestrator.kb()
    }
}

pub fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let bytes = serde_json::to_vec(body).expect("API bodies serialize");
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static(JSON_CONTENT_TYPE))],
        bytes,
    )
        .into_response()
}

fn error_response(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    json_response(
        status,
        &ApiErrorBody {
            error: ApiErrorDetail {
                code: code.to_owned(),
                message: message.into(),
            },
        },
    )
}

fn query_error_response(err: &QueryError) -> Response {
    match err {
        QueryError::UnknownDepartment(_) => error_response(StatusCode::NOT_FOUND, "unknown_department", err.to_string()),
        QueryError::EmptyQuery | QueryError::InvalidK(_) => {
            error_response(StatusCode::BAD_REQUEST, "invalid_query", err.to_string())
        }
    }
}

/// Turns URL parameters into a [`RawQuery`]; blank `dept` means no facet.
#[allow(clippy::result_large_err)]
pub fn parse_search_params(params: SearchParams) -> Result<RawQuery, Response> {
    let text = params.q.unwrap_or_default();
    if text.trim().is_empty() {
        return Err(query_error_response(&QueryError::EmptyQuery));
    }
    let mut raw = RawQuery::new(text);
    if let Some(k) = params.k.filter(|k| !k.trim().is_empty()) {
        match k.trim().parse::<usize>() {
            Ok(k) if k >= 1 => raw.k = k,
            _ => {
                return Err(error_response(
                    StatusCode::BAD_REQUEST,
                    "invalid_query",
                    format!("k must be a positive integer (got `{k}`)"),
                ))
            }
        }
    }
    if let Some(dept) = params.dept.filter(|d| !d.trim().is_empty()) {
        raw.department_filter = Some(dept);
    }
    Ok(raw)
}

async fn search_handler(State(state): State<AppState>, Query(params): Query<SearchParams>) -> Response {
    let raw = match parse_search_params(params) {
        Ok(raw) => raw,
        Err(resp) => return resp,
    };
    match state.orchestrator.handle(&raw) {
        Ok(resp) => json_response(StatusCode::OK, &ApiSearchResponse::from(resp)),
        Err(err) => query_error_response(&err.error),
    }
}

async fn departments_handler(State(state): State<AppState>) -> Response {
    let list: Vec<DepartmentEntry> = state
        .kb()
        .departments()
        .iter()
        .map(|d| DepartmentEntry {
            id: d.id.clone(),
            name: d.name.clone(),
        })
        .collect();
    json_response(StatusCode::OK, &list)
}

async fn employee_handler(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let kb = state.kb();
    match kb.employee(&id) {
        Some(e) => json_response(
            StatusCode::OK,
            &EmployeeCard {
                id: e.id.clone(),
                full_name: e.full_name.clone(),
                phone: e.phone.clone(),
                email: e.email.clone(),
                position_title: e.position_title.clone(),
                department_id: e.department_id.clone(),
                department: kb
                    .department(&e.department_id)
                    .map(|d| d.name.clone())
                    .unwrap_or_default(),
            },
        ),
        None => error_response(StatusCode::NOT_FOUND, "unknown_employee", format!("no employee `{id}`")),
    }
}

async fn health_handler(State(state): State<AppState>) -> Response {
    json_response(
        StatusCode::OK,
        &Health {
            status: "ok".into(),
            kb_fingerprint: state.kb().fingerprint().to_owned(),
        },
    )
}

async fn not_found() -> Response {
    error_response(StatusCode::NOT_FOUND, "not_found", "no such route")
}

async fn cors(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let mut resp = next.run(req).await;
    if let Some(origin) = &state.cors_allowed_origin {
        let headers = resp.headers_mut();
        headers.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, origin.clone());
        headers.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET"));
        headers.insert(header::VARY, HeaderValue::from_static("Origin"));
    }
    resp
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/search", get(search_handler))
        .route("/api/departments", get(departments_handler))
        .route("/api/employees/{id}", get(employee_handler))
        .route("/api/health", get(health_handler))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), cors))
        .with_state(state)
}

/// Serves the API on an already-bound listener until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::{to_bytes, Body};
    use axum::http::Request;
    use tower::ServiceExt;

    fn state(cors: Option<&str>) -> AppState {
        let kb = KnowledgeBase::from_json_str(
            r#"{
            "classes": [],
            "concepts": ["invoice"],
            "departments": [{"id": "finance", "name": "Finance", "aliases": []}],
            "employees": [{"id": "e1", "full_name": "Ana", "phone": "1", "email": "a@x",
                           "position_title": "Clerk", "department_id": "finance"}],
            "cases": [{"id": "c1", "employee_id": "e1", "concepts": ["invoice"],
                       "department_id": "finance", "factor": 1.0, "peers": 0}],
            "lexicon": {"invoice": ["invoice"]}
        }"#,
        )
        .unwrap();
        AppState::new(Arc::new(kb), ScoringParams::default(), cors)
    }

    async fn get(state: AppState, uri: &str) -> (StatusCode, Option<String>, Option<String>, serde_json::Value) {
        let resp = router(state)
            .oneshot(Request::get(uri).body(Body::empty()).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        let ct = resp
            .headers()
            .get(header::CONTENT_TYPE)
            .map(|v| v.to_str().unwrap().to_owned());
        let cors = resp
            .headers()
            .get(header::ACCESS_CONTROL_ALLOW_ORIGIN)
            .map(|v| v.to_str().unwrap().to_owned());
        let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        (status, ct, cors, serde_json::from_slice(&body).unwrap())
    }

    #[tokio::test]
    async fn search_ok() {
        let (status, ct, cors, body) = get(state(None), "/api/search?q=invoices").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(ct.as_deref(), Some(JSON_CONTENT_TYPE));
        assert!(cors.is_none());
        assert_eq!(body["results"][0]["employee_id"], "e1");
        assert_eq!(body["results"][0]["department"], "finance");
    }

    #[tokio::test]
    async fn search_errors() {
        let (status, _, _, body) = get(state(None), "/api/search?q=").await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(body["error"]["code"], "invalid_query");
        let (status, _, _, _) = get(state(None), "/api/search").await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        for k in ["0", "-1", "ten"] {
            let (status, _, _, _) = get(state(None), &format!("/api/search?q=invoice&k={k}")).await;
            assert_eq!(status, StatusCode::BAD_REQUEST, "k={k}");
        }
        let (status, _, _, body) = get(state(None), "/api/search?q=invoice&dept=mars").await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(body["error"]["code"], "unknown_department");
    }

    #[tokio::test]
    async fn directory_routes() {
        let (status, _, _, body) = get(state(None), "/api/departments").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, serde_json::json!([{"id": "finance", "name": "Finance"}]));
        let (status, _, _, body) = get(state(None), "/api/employees/e1").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["department"], "Finance");
        let (status, ct, _, _) = get(state(None), "/api/employees/nope").await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(ct.as_deref(), Some(JSON_CONTENT_TYPE));
        let (status, _, _, _) = get(state(None), "/nope").await;
        assert_eq!(status, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn cors_header_only_when_configured() {
        let (_, _, cors, body) = get(state(Some("http://localhost:5173")), "/api/health").await;
        assert_eq!(cors.as_deref(), Some("http://localhost:5173"));
        assert_eq!(body["status"], "ok");
    }
}
