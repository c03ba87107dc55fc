//! HTTP/JSON API over the dayplan engine, and the `dayplan` command line.
//!
//! Stateless routes plan, validate, extract and infer. Refinement sessions
//! live in memory, expire after an idle period, and serialize their own
//! mutations behind a per-session lock.

pub mod cli;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use dayplan::datagen::{generate_personas, Persona};
use dayplan::model::{Plan, PlanRequest, RequestError};
use dayplan::reflect::{
    extract_constraints, infer_commonsense, plan_with_commonsense, CommonsenseOracle, Extraction,
    Inference, LookupOracle,
};
use dayplan::scheduler::{self, ScheduleResult};
use dayplan::stn::SolverConfig;
use dayplan::validator::{
    check_commonsense, check_plan, compute_metrics, verbalize_violations, CommonsenseDb, CommonsenseReport,
    MetricsReport, ViolationReport,
};

/// Largest persona count `/personas` will generate.
pub const MAX_PERSONAS: usize = 1000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Symplan,
    SymplanPlus,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 2] = [PlannerKind::Symplan, PlannerKind::SymplanPlus];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Symplan => "symplan",
            PlannerKind::SymplanPlus => "symplan_plus",
        }
    }
}

/// Plans `req` with the chosen planner. `symplan_plus` first asks `oracle`
/// for commonsense constraints.
pub fn run_planner(
    kind: PlannerKind,
    req: &PlanRequest,
    cfg: &SolverConfig,
    oracle: &dyn CommonsenseOracle,
) -> Result<ScheduleResult, RequestError> {
    match kind {
        PlannerKind::Symplan => scheduler::plan(req, cfg),
        PlannerKind::SymplanPlus => plan_with_commonsense(req, oracle, cfg).map(|(r, _)| r),
    }
}

#[derive(Clone)]
pub struct ServiceConfig {
    pub solver: SolverConfig,
    pub db: CommonsenseDb,
    pub oracle: Arc<dyn CommonsenseOracle>,
    /// Whether `oracle` is a remote model; its failures then become 502s.
    pub remote_oracle: bool,
    pub idle_timeout: Duration,
    pub static_dir: Option<PathBuf>,
    /// Allowed browser origin. Any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            solver: SolverConfig::default(),
            db: CommonsenseDb::bundled().clone(),
            oracle: Arc::new(LookupOracle::bundled().clone()),
            remote_oracle: false,
            idle_timeout: Duration::from_secs(3600),
            static_dir: Some(PathBuf::from("webui/dist")),
            cors_origin: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    Positive,
    Negative,
}

/// One refinement request and what it did to the session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineStep {
    pub utterance: String,
    pub extracted: bool,
    pub applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<Extraction>,
    /// Extracted edits as event lines.
    pub lines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// The session request after this step.
    pub request: PlanRequest,
}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    pub id: String,
    pub initial_request: PlanRequest,
    pub request: PlanRequest,
    /// Latest result per planner name.
    pub plans: BTreeMap<String, ScheduleResult>,
    pub trace: Vec<RefineStep>,
    pub feedback: BTreeMap<String, Feedback>,
    #[serde(skip)]
    last_used: Instant,
}

type SessionSlot = Arc<tokio::sync::Mutex<Session>>;

struct Inner {
    cfg: ServiceConfig,
    sessions: Mutex<HashMap<String, SessionSlot>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Self {
        AppState(Arc::new(Inner {
            cfg,
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.cfg
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the configured timeout. Sessions
    /// busy with a request are kept.
    pub fn purge_expired(&self) {
        let idle = self.0.cfg.idle_timeout;
        self.0.sessions.lock().unwrap().retain(|_, slot| match slot.try_lock() {
            Ok(s) => s.last_used.elapsed() <= idle,
            Err(_) => true,
        });
    }

    fn slot(&self, id: &str) -> Result<SessionSlot, ApiError> {
        self.purge_expired();
        self.0
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
            detail: None,
        }
    }

    fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session `{id}`"))
    }
}

impl From<RequestError> for ApiError {
    fn from(e: RequestError) -> Self {
        let kind = match e {
            RequestError::EmptyName => "EmptyName",
            RequestError::DuplicateEvent(_) => "DuplicateEvent",
            RequestError::InvalidHorizon { .. } => "InvalidHorizon",
            RequestError::UnknownEventReference { .. } => "UnknownEventReference",
            RequestError::SelfReference(_) => "SelfReference",
        };
        ApiError::bad_request(kind, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(detail) = self.detail {
            body["detail"] = detail;
        }
        (self.status, Json(body)).into_response()
    }
}

/// JSON bodies are parsed by hand so malformed input is a 400 with the
/// parser's message.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("InvalidJson", e.to_string()))
}

fn query_error(e: QueryRejection) -> ApiError {
    ApiError::bad_request("InvalidQuery", e.body_text())
}

fn parse_request(body: &Bytes) -> Result<PlanRequest, ApiError> {
    let req: PlanRequest = parse_body(body)?;
    req.validate()?;
    Ok(req)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("planner task panicked")
}

async fn plan_all(state: &AppState, req: &PlanRequest) -> Result<BTreeMap<String, ScheduleResult>, ApiError> {
    let cfg = state.config().solver.clone();
    let oracle = state.config().oracle.clone();
    let req = req.clone();
    blocking(move || {
        PlannerKind::ALL
            .iter()
            .map(|&k| run_planner(k, &req, &cfg, oracle.as_ref()).map(|r| (k.name().to_string(), r)))
            .collect::<Result<BTreeMap<_, _>, _>>()
    })
    .await
    .map_err(ApiError::from)
}

#[derive(Debug, Default, Deserialize)]
pub struct PlanQuery {
    #[serde(default)]
    pub planner: PlannerKind,
}

async fn plan_route(
    State(state): State<AppState>,
    q: Result<Query<PlanQuery>, QueryRejection>,
    body: Bytes,
) -> Result<Json<ScheduleResult>, ApiError> {
    let Query(q) = q.map_err(query_error)?;
    let req = parse_request(&body)?;
    let cfg = state.config().solver.clone();
    let oracle = state.config().oracle.clone();
    let result = blocking(move || run_planner(q.planner, &req, &cfg, oracle.as_ref())).await?;
    Ok(Json(result))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateBody {
    pub request: PlanRequest,
    pub plan: Plan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub violations: ViolationReport,
    pub feedback: Vec<String>,
    pub metrics: MetricsReport,
    pub commonsense: CommonsenseReport,
}

async fn validate_route(State(state): State<AppState>, body: Bytes) -> Result<Json<ValidateResponse>, ApiError> {
    let ValidateBody { request, plan } = parse_body(&body)?;
    request.validate()?;
    let violations = check_plan(&request, &plan);
    let commonsense = check_commonsense(&plan, &state.config().db);
    Ok(Json(ValidateResponse {
        feedback: verbalize_violations(&violations),
        metrics: compute_metrics(&request, &plan).with_commonsense(&commonsense),
        violations,
        commonsense,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceBody {
    pub utterance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractResponse {
    pub extracted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<Extraction>,
    pub lines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn utterance(body: &Bytes) -> Result<String, ApiError> {
    let UtteranceBody { utterance } = parse_body(body)?;
    if utterance.trim().is_empty() {
        return Err(ApiError::bad_request("EmptyUtterance", "utterance is empty"));
    }
    Ok(utterance)
}

fn extract(text: &str) -> ExtractResponse {
    match extract_constraints(text) {
        Ok(x) => ExtractResponse {
            extracted: true,
            lines: x.lines(),
            extraction: Some(x),
            message: None,
        },
        Err(e) => ExtractResponse {
            extracted: false,
            extraction: None,
            lines: Vec::new(),
            message: Some(e.to_string()),
        },
    }
}

async fn extract_route(body: Bytes) -> Result<Json<ExtractResponse>, ApiError> {
    Ok(Json(extract(&utterance(&body)?)))
}

async fn infer_route(State(state): State<AppState>, body: Bytes) -> Result<Json<Inference>, ApiError> {
    let req = parse_request(&body)?;
    let cfg = state.config().solver.clone();
    let oracle = state.config().oracle.clone();
    let inference = blocking(move || infer_commonsense(&req, oracle.as_ref(), &cfg)).await?;
    if state.config().remote_oracle && !inference.failures.is_empty() {
        let mut e = ApiError::new(
            StatusCode::BAD_GATEWAY,
            "OracleFailure",
            format!("oracle failed for {} event(s)", inference.failures.len()),
        );
        e.detail = Some(json!(inference.failures));
        return Err(e);
    }
    Ok(Json(inference))
}

#[derive(Debug, Deserialize)]
pub struct PersonaQuery {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub n: usize,
}

fn default_seed() -> u64 {
    42
}

fn default_count() -> usize {
    10
}

async fn personas_route(q: Result<Query<PersonaQuery>, QueryRejection>) -> Result<Json<Vec<Persona>>, ApiError> {
    let Query(q) = q.map_err(query_error)?;
    if q.n > MAX_PERSONAS {
        return Err(ApiError::bad_request("TooManyPersonas", format!("n must be at most {MAX_PERSONAS}")));
    }
    let personas = blocking(move || generate_personas(q.seed, q.n))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Datagen", e.to_string()))?;
    Ok(Json(personas))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Session>), ApiError> {
    let req = parse_request(&body)?;
    let plans = plan_all(&state, &req).await?;
    let session = Session {
        id: uuid::Uuid::new_v4().simple().to_string(),
        initial_request: req.clone(),
        request: req,
        plans,
        trace: Vec::new(),
        feedback: BTreeMap::new(),
        last_used: Instant::now(),
    };
    state.purge_expired();
    state
        .0
        .sessions
        .lock()
        .unwrap()
        .insert(session.id.clone(), Arc::new(tokio::sync::Mutex::new(session.clone())));
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Session>, ApiError> {
    let slot = state.slot(&id)?;
    let mut s = slot.lock().await;
    s.last_used = Instant::now();
    Ok(Json(s.clone()))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match state.0.sessions.lock().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(&id)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineResponse {
    pub extracted: bool,
    pub applied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extraction: Option<Extraction>,
    pub lines: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub session: Session,
}

async fn refine(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<RefineResponse>, ApiError> {
    let text = utterance(&body)?;
    let slot = state.slot(&id)?;
    let mut s = slot.lock().await;
    s.last_used = Instant::now();

    let ex = extract(&text);
    let mut message = ex.message.clone();
    let mut applied = false;
    if let Some(x) = &ex.extraction {
        match x.apply(&s.request) {
            Ok(next) => {
                s.plans = plan_all(&state, &next).await?;
                s.request = next;
                applied = true;
            }
            Err(e) => message = Some(e.to_string()),
        }
    }
    let step = RefineStep {
        utterance: text,
        extracted: ex.extracted,
        applied,
        extraction: ex.extraction.clone(),
        lines: ex.lines.clone(),
        message: message.clone(),
        request: s.request.clone(),
    };
    s.trace.push(step);
    s.last_used = Instant::now();
    Ok(Json(RefineResponse {
        extracted: ex.extracted,
        applied,
        extraction: ex.extraction,
        lines: ex.lines,
        message,
        session: s.clone(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackBody {
    pub planner: PlannerKind,
    pub feedback: Feedback,
}

async fn feedback(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Session>, ApiError> {
    let FeedbackBody { planner, feedback } = parse_body(&body)?;
    let slot = state.slot(&id)?;
    let mut s = slot.lock().await;
    if !s.plans.contains_key(planner.name()) {
        return Err(ApiError::bad_request("NoPlan", format!("no {} plan to rate", planner.name())));
    }
    s.feedback.insert(planner.name().to_string(), feedback);
    s.last_used = Instant::now();
    Ok(Json(s.clone()))
}

/// All routes, with CORS and the static client bundle as fallback.
pub fn router(state: AppState) -> Router {
    let cfg = state.config().clone();
    let api = Router::new()
        .route("/plan", post(plan_route))
        .route("/validate", post(validate_route))
        .route("/extract", post(extract_route))
        .route("/infer", post(infer_route))
        .route("/personas", get(personas_route))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/refine", post(refine))
        .route("/sessions/{id}/feedback", post(feedback))
        .with_state(state);
    let cors = match cfg.cors_origin.as_deref().and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(origin) => CorsLayer::new()
            .allow_origin(AllowOrigin::exact(origin))
            .allow_methods(tower_http::cors::Any)
            .allow_headers(tower_http::cors::Any),
        None => CorsLayer::permissive(),
    };
    let app = match cfg.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors)
}

/// Serves the API on `addr` until the process ends, sweeping idle
/// sessions once a minute.
pub async fn serve(addr: SocketAddr, cfg: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(cfg);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.purge_expired();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
