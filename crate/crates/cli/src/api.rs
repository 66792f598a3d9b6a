//! HTTP JSON API over a persisted review session.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lexharm_core::rules::RuleId;
use lexharm_core::{Decision, Error, HarmonizationSession, SessionStore};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;

pub struct AppState {
    store: SessionStore,
    session: RwLock<HarmonizationSession>,
}

impl AppState {
    pub fn open(store: SessionStore) -> lexharm_core::Result<Self> {
        let session = store.load()?;
        Ok(AppState {
            store,
            session: RwLock::new(session),
        })
    }
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::State(_) => StatusCode::CONFLICT,
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "json",
            message: e.body_text(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn to_json(v: impl serde::Serialize) -> ApiResult {
    serde_json::to_value(v)
        .map(Json)
        .map_err(|e| Error::from(e).into())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/session", get(session))
        .route("/api/history", get(history))
        .route("/api/rules", get(rules))
        .route("/api/candidates", get(candidates))
        .route("/api/preview", get(preview))
        .route("/api/decisions", post(decisions))
        .route("/api/iterate", post(iterate))
        .with_state(state)
}

async fn session(State(st): State<Arc<AppState>>) -> ApiResult {
    to_json(st.session.read().await.status())
}

async fn history(State(st): State<Arc<AppState>>) -> ApiResult {
    to_json(&st.session.read().await.history)
}

async fn rules(State(st): State<Arc<AppState>>) -> ApiResult {
    to_json(&st.session.read().await.accepted)
}

async fn candidates(State(st): State<Arc<AppState>>) -> ApiResult {
    let s = st.session.read().await;
    let report = s
        .pending
        .as_ref()
        .ok_or_else(|| Error::State("no pending report; run an iteration first".into()))?;
    to_json(report)
}

#[derive(Deserialize)]
struct PreviewQuery {
    #[serde(default)]
    rules: String,
}

async fn preview(State(st): State<Arc<AppState>>, Query(q): Query<PreviewQuery>) -> ApiResult {
    let ids: Vec<RuleId> = q
        .rules
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        // An unescaped `+` in a query string arrives as a space; ids have no spaces.
        .map(|s| s.replace(' ', "+"))
        .collect();
    let projection = st.session.read().await.preview(&ids)?;
    to_json(json!({ "rules": ids, "projection": projection }))
}

#[derive(Deserialize)]
struct DecisionsBody {
    decisions: BTreeMap<RuleId, Decision>,
}

/// Mutations run on a copy that replaces the live session only once it is
/// on disk, so a failed commit or save leaves both untouched.
async fn decisions(
    State(st): State<Arc<AppState>>,
    body: Result<Json<DecisionsBody>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let mut live = st.session.write().await;
    let mut next = live.clone();
    next.commit_decisions(&body.decisions)?;
    st.store.save(&next)?;
    *live = next;
    let record = live.history.last().expect("commit appends history");
    to_json(json!({ "record": record, "status": live.status() }))
}

async fn iterate(State(st): State<Arc<AppState>>) -> ApiResult {
    let mut live = st.session.write().await;
    let mut next = live.clone();
    next.run_iteration()?;
    st.store.save(&next)?;
    *live = next;
    to_json(live.pending.as_ref())
}

/// Serves the API until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review API listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
