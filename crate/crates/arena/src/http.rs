//! HTTP+JSON facade over sessions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use arena_core::catalog::Catalog;
use arena_core::metrics::TipsParams;
use arena_core::planmodel::PhysicalPlan;
use arena_core::planspace::PruneThresholds;
use arena_core::tips::{PipelineConfig, DEFAULT_TAU_G, DEFAULT_TAU_L};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use uuid::Uuid;

use crate::session::{Session, SessionError};

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let status = match self {
            SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = Arc<Mutex<Session>>;

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<Uuid, Shared>>,
    catalog: Option<Catalog>,
}

impl AppState {
    pub fn new(catalog: Option<Catalog>) -> Self {
        AppState {
            sessions: RwLock::default(),
            catalog,
        }
    }

    fn session(&self, id: &str) -> Result<Shared, SessionError> {
        let unknown = || SessionError::NotFound(format!("unknown session {id}"));
        let uuid = Uuid::parse_str(id).map_err(|_| unknown())?;
        self.sessions.read().expect("session map lock").get(&uuid).cloned().ok_or_else(unknown)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/qep", get(get_qep))
        .route("/sessions/{id}/select/batch", post(select_batch))
        .route("/sessions/{id}/select/step", post(select_step))
        .route("/sessions/{id}/viewed", post(mark_viewed))
        .route("/sessions/{id}/plans/{pid}", get(get_plan))
        .route("/sessions/{id}/compare", get(compare))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub sql: Option<String>,
    pub plans: Option<Vec<PhysicalPlan>>,
    pub qep_id: Option<u64>,
    pub catalog: Option<Value>,
    pub params: Option<TipsParams>,
    pub thresholds: Option<PruneThresholds>,
    pub tau_l: Option<usize>,
    pub tau_g: Option<usize>,
    pub sample_n: Option<usize>,
    pub seed: Option<u64>,
    /// Fixed refined distances `[a, b, d]` used for selection instead of computed ones.
    pub distance_matrix: Option<Vec<(u64, u64, f64)>>,
}

fn build_session(req: CreateRequest, default_catalog: Option<&Catalog>) -> Result<Session, SessionError> {
    let params = req.params.unwrap_or_default();
    params.validate()?;
    let thresholds = req.thresholds.unwrap_or_default();
    PruneThresholds::new(thresholds.tau_d, thresholds.tau_c)?;
    let cfg = PipelineConfig {
        params,
        thresholds,
        tau_l: req.tau_l.unwrap_or(DEFAULT_TAU_L),
        tau_g: req.tau_g.unwrap_or(DEFAULT_TAU_G),
        sample_n: req.sample_n,
        seed: req.seed.unwrap_or(0),
    };
    let session = match (req.sql, req.plans) {
        (Some(sql), None) => {
            let owned;
            let catalog = match (req.catalog, default_catalog) {
                (Some(v), _) => {
                    owned = Catalog::from_value(v)?;
                    &owned
                }
                (None, Some(c)) => c,
                (None, None) => return Err(SessionError::BadRequest("no catalog given and no server default".into())),
            };
            Session::from_sql(&sql, catalog, &cfg)?
        }
        (None, Some(plans)) => Session::from_plans(plans, req.qep_id, &cfg)?,
        _ => return Err(SessionError::BadRequest("give exactly one of `sql` or `plans`".into())),
    };
    match req.distance_matrix {
        Some(m) => session.with_distance_matrix(m),
        None => Ok(session),
    }
}

fn bad_json(e: impl std::fmt::Display) -> SessionError {
    SessionError::BadRequest(format!("invalid request body: {e}"))
}

async fn create_session(State(app): State<Arc<AppState>>, body: String) -> Result<Response, SessionError> {
    let req: CreateRequest = serde_json::from_str(&body).map_err(bad_json)?;
    let app2 = app.clone();
    let session = tokio::task::spawn_blocking(move || build_session(req, app2.catalog.as_ref()))
        .await
        .map_err(|e| SessionError::BadRequest(e.to_string()))??;
    let summary = session.summary();
    app.sessions
        .write()
        .expect("session map lock")
        .insert(session.id(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn get_qep(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, SessionError> {
    let s = app.session(&id)?;
    let s = s.lock().expect("session lock");
    Ok(Json(s.summary().qep).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchRequest {
    k: usize,
    params: Option<TipsParams>,
}

async fn select_batch(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: String,
) -> Result<Response, SessionError> {
    let req: BatchRequest = serde_json::from_str(&body).map_err(bad_json)?;
    let s = app.session(&id)?;
    let report = tokio::task::spawn_blocking(move || s.lock().expect("session lock").batch(req.k, req.params))
        .await
        .map_err(|e| SessionError::BadRequest(e.to_string()))??;
    Ok(Json(report).into_response())
}

async fn select_step(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, SessionError> {
    let s = app.session(&id)?;
    let report = s.lock().expect("session lock").step()?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewedRequest {
    plan_id: u64,
}

async fn mark_viewed(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: String,
) -> Result<Response, SessionError> {
    let req: ViewedRequest = serde_json::from_str(&body).map_err(bad_json)?;
    let s = app.session(&id)?;
    let mut s = s.lock().expect("session lock");
    let viewed = s.mark_viewed(req.plan_id)?;
    Ok(Json(json!({ "viewed": viewed })).into_response())
}

async fn get_plan(
    State(app): State<Arc<AppState>>,
    Path((id, pid)): Path<(String, u64)>,
) -> Result<Response, SessionError> {
    let s = app.session(&id)?;
    let view = s.lock().expect("session lock").view(pid)?;
    Ok(Json(view).into_response())
}

#[derive(Debug, Deserialize)]
struct ComparePair {
    a: u64,
    b: u64,
}

async fn compare(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(pair): Query<ComparePair>,
) -> Result<Response, SessionError> {
    let s = app.session(&id)?;
    let report = s.lock().expect("session lock").compare(pair.a, pair.b)?;
    Ok(Json(report).into_response())
}
