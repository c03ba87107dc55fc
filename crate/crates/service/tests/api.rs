use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dayplan::datagen::generate_personas;
use dayplan::model::{Constraint, PlanRequest};
use dayplan::reflect::{CommonsenseOracle, OracleError};
use dayplan::scheduler::plan;
use dayplan::stn::SolverConfig;
use dayplan_service::{router, run_planner, AppState, PlannerKind, ServiceConfig};

fn app_with(cfg: ServiceConfig) -> Router {
    router(AppState::new(ServiceConfig { static_dir: None, ..cfg }))
}

fn app() -> Router {
    app_with(ServiceConfig::default())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut rq = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            rq = rq.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(rq.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn lines(text: &str) -> PlanRequest {
    PlanRequest::from_lines(text).unwrap()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap()
}

#[tokio::test]
async fn plan_equals_library_call() {
    let app = app();
    let cfg = SolverConfig::default();
    for persona in generate_personas(7, 5).unwrap() {
        let (status, body) = call(&app, Method::POST, "/plan", Some(to_value(&persona.request))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, to_value(&plan(&persona.request, &cfg).unwrap()));
    }
}

#[tokio::test]
async fn plan_with_commonsense_planner() {
    let app = app();
    let req = lines("write my paper: >2 hours\nlunch: >30 minutes");
    let (status, body) = call(&app, Method::POST, "/plan?planner=symplan_plus", Some(to_value(&req))).await;
    assert_eq!(status, StatusCode::OK);
    let cfg = ServiceConfig::default();
    let expected = run_planner(PlannerKind::SymplanPlus, &req, &cfg.solver, cfg.oracle.as_ref()).unwrap();
    assert_eq!(body, to_value(&expected));
    assert_eq!(body["plan"][0]["event"], "lunch");
}

#[tokio::test]
async fn plan_rejects_bad_input() {
    let app = app();
    let body = json!({"events": [{"name": "a", "constraints": ["after ghost"]}]});
    let (status, err) = call(&app, Method::POST, "/plan", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"], "UnknownEventReference");

    let body = json!({"events": [{"name": "a", "constraints": ["sometime soon"]}]});
    let (status, err) = call(&app, Method::POST, "/plan", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"], "InvalidJson");

    let (status, _) = call(&app, Method::POST, "/plan?planner=oracle", Some(json!({"events": []}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn empty_request_plans_empty() {
    let (status, body) = call(&app(), Method::POST, "/plan", Some(json!({"events": []}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["plan"], json!([]));
    assert_eq!(body["complete"], true);
}

#[tokio::test]
async fn validate_scheduler_output() {
    let app = app();
    let mut req = lines("jog: before lunch\nlunch: >30 minutes, <60 minutes");
    req.events[0].constraints.push(Constraint::StartsBefore("16:00".parse().unwrap()));
    let (_, planned) = call(&app, Method::POST, "/plan", Some(to_value(&req))).await;
    let body = json!({"request": req, "plan": planned["plan"]});
    let (status, report) = call(&app, Method::POST, "/validate", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["feedback"], json!([]));
    assert_eq!(report["metrics"]["CO"], 100.0);
    assert_eq!(report["violations"]["unsatisfied"], json!([]));
}

#[tokio::test]
async fn extract_vocabulary() {
    let app = app();
    let (status, body) = call(&app, Method::POST, "/extract", Some(json!({"utterance": "move gym to the afternoon"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["extracted"], true);
    assert_eq!(body["lines"], json!(["gym: starts after 12:00"]));

    let (_, body) = call(&app, Method::POST, "/extract", Some(json!({"utterance": "I want frequent breaks in the afternoon"}))).await;
    assert_eq!(body["extracted"], false);

    let (status, _) = call(&app, Method::POST, "/extract", Some(json!({"utterance": "  "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn personas_are_deterministic() {
    let app = app();
    let (status, a) = call(&app, Method::GET, "/personas?seed=42&n=3", None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b) = call(&app, Method::GET, "/personas?seed=42&n=3", None).await;
    assert_eq!(a, b);
    assert_eq!(a, to_value(&generate_personas(42, 3).unwrap()));
    let (status, _) = call(&app, Method::GET, "/personas?seed=1&n=100000", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn infer_with_lookup_oracle() {
    let req = lines("write my paper: >2 hours\nstandup: starts at 9:00, ends at 9:15");
    let (status, body) = call(&app(), Method::POST, "/infer", Some(to_value(&req))).await;
    assert_eq!(status, StatusCode::OK);
    let accepted: Vec<_> = body["accepted"].as_array().unwrap().iter().map(|s| s["constraint"].clone()).collect();
    assert_eq!(accepted, [json!("starts after 13:00"), json!("ends before 17:00")]);
    assert_eq!(body["skipped"], json!(["standup"]));
}

struct Down;

impl CommonsenseOracle for Down {
    fn suggest(&self, _: &str) -> Result<Vec<Constraint>, OracleError> {
        Err(OracleError("connection refused".into()))
    }
}

#[tokio::test]
async fn remote_oracle_failure_is_bad_gateway() {
    let app = app_with(ServiceConfig {
        oracle: Arc::new(Down),
        remote_oracle: true,
        ..ServiceConfig::default()
    });
    let (status, body) = call(&app, Method::POST, "/infer", Some(to_value(&lines("lunch")))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["error"], "OracleFailure");
}

async fn new_session(app: &Router, req: &PlanRequest) -> Value {
    let (status, body) = call(app, Method::POST, "/sessions", Some(to_value(req))).await;
    assert_eq!(status, StatusCode::CREATED);
    body
}

async fn refine(app: &Router, id: &str, utterance: &str) -> (StatusCode, Value) {
    call(app, Method::POST, &format!("/sessions/{id}/refine"), Some(json!({ "utterance": utterance }))).await
}

#[tokio::test]
async fn refine_lunch_at_noon() {
    let app = app();
    let session = new_session(&app, &lines("lunch\nemails: <30 minutes")).await;
    let id = session["id"].as_str().unwrap();
    assert!(session["plans"]["symplan"].is_object() && session["plans"]["symplan_plus"].is_object());

    let (status, body) = refine(&app, id, "lunch should start at noon and be at least 30 minutes").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["extracted"], true);
    assert_eq!(body["lines"], json!(["lunch: starts at 12:00, >30 minutes"]));
    let req: PlanRequest = serde_json::from_value(body["session"]["request"].clone()).unwrap();
    assert_eq!(req.events[0].to_string(), "lunch: starts at 12:00, >30 minutes");
    for planner in ["symplan", "symplan_plus"] {
        let entries = body["session"]["plans"][planner]["plan"].as_array().unwrap();
        let lunch = entries.iter().find(|e| e["event"] == "lunch").unwrap();
        assert_eq!(lunch["start"], "12:00");
    }

    let (status, body) = refine(&app, id, "I want frequent breaks in the afternoon").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["extracted"], false);
    assert_eq!(body["session"]["request"], to_value(&req));
    assert_eq!(body["session"]["trace"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn replaying_trace_reproduces_request() {
    let app = app();
    let initial = lines("lunch\ngym: >45 minutes\nemails: <30 minutes");
    let id = new_session(&app, &initial).await["id"].as_str().unwrap().to_string();
    let utterances = [
        "lunch should start at noon and be at least 30 minutes",
        "move gym to the afternoon",
        "add groceries",
        "make room for a nap",
        "remove emails",
    ];
    for u in utterances {
        refine(&app, &id, u).await;
    }
    let (_, first) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(first["trace"].as_array().unwrap().len(), utterances.len());

    let replay = new_session(&app, &initial).await["id"].as_str().unwrap().to_string();
    for step in first["trace"].as_array().unwrap() {
        refine(&app, &replay, step["utterance"].as_str().unwrap()).await;
    }
    let (_, second) = call(&app, Method::GET, &format!("/sessions/{replay}"), None).await;
    assert_eq!(first["request"], second["request"]);
    assert_eq!(first["plans"], second["plans"]);
}

#[tokio::test]
async fn session_lifecycle() {
    let app = app();
    let id = new_session(&app, &lines("lunch")).await["id"].as_str().unwrap().to_string();
    let (status, _) = refine(&app, &id, "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let uri = format!("/sessions/{id}/feedback");
    let (status, body) = call(&app, Method::POST, &uri, Some(json!({"planner": "symplan_plus", "feedback": "positive"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["feedback"], json!({"symplan_plus": "positive"}));
    let (_, body) = call(&app, Method::POST, &uri, Some(json!({"planner": "symplan_plus", "feedback": "negative"}))).await;
    assert_eq!(body["feedback"], json!({"symplan_plus": "negative"}));
    assert_eq!(body["trace"], json!([]));

    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = refine(&app, &id, "move lunch to the afternoon").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "UnknownSession");
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let state = AppState::new(ServiceConfig {
        idle_timeout: Duration::from_millis(50),
        static_dir: None,
        ..ServiceConfig::default()
    });
    let app = router(state.clone());
    let id = new_session(&app, &lines("lunch")).await["id"].as_str().unwrap().to_string();
    assert_eq!(state.session_count(), 1);
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_refines_are_serialized() {
    let app = app();
    let id = new_session(&app, &lines("lunch\ngym")).await["id"].as_str().unwrap().to_string();
    let mut tasks = Vec::new();
    for i in 0..8 {
        let app = app.clone();
        let id = id.clone();
        let u = if i % 2 == 0 { "move gym to the evening" } else { "add task {i}" }.replace("{i}", &i.to_string());
        tasks.push(tokio::spawn(async move { refine(&app, &id, &u).await.0 }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let (_, s) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let trace = s["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 8);
    // Every step saw the request left by the one before it.
    let events = |v: &Value| v["events"].as_array().unwrap().len();
    for pair in trace.windows(2) {
        assert!(events(&pair[1]["request"]) >= events(&pair[0]["request"]));
    }
    assert_eq!(events(&s["request"]), 6);
}

#[tokio::test]
async fn cors_and_static_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>planner</html>").unwrap();
    let app = router(AppState::new(ServiceConfig {
        static_dir: Some(dir.path().to_path_buf()),
        cors_origin: Some("http://localhost:5173".into()),
        ..ServiceConfig::default()
    }));
    let rq = Request::builder()
        .uri("/index.html")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(rq).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<html>planner</html>");

    let rq = Request::builder()
        .method(Method::OPTIONS)
        .uri("/plan")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(rq).await.unwrap();
    assert!(resp.status().is_success());
}
