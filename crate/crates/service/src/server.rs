//! HTTP session service.
//!
//! Sessions live in memory. Each one sits behind its own mutex, so requests
//! to one session are serialized while distinct sessions run concurrently.
//! Mutating calls may carry `If-Match: <revision>`; a mismatch is rejected
//! with 409 before anything changes.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use bart::classifier::{Controller, FeedItem};
use bart::influence::{solve, SolveOptions};
use bart::{CompiledModel, Error, Evidence, Finding, Session};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::api::{self, CreateSession, FindingBody, SessionKind, SolveRequest, WhatIf};

#[derive(Debug, Clone, Serialize)]
pub struct SessionHandle {
    pub id: String,
    /// Source hash of the model the session was opened on.
    pub model: String,
    pub kind: SessionKind,
    pub name: String,
    pub created_at: u64,
    pub revision: u64,
}

enum Engine {
    Network(Box<Session>),
    Classifier(Box<Controller>),
}

struct Entry {
    handle: SessionHandle,
    engine: Engine,
}

pub struct AppState {
    model: Arc<CompiledModel>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Entry>>>>,
    next_id: AtomicU64,
    snapshot_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(model: CompiledModel) -> Self {
        AppState {
            model: Arc::new(model),
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            snapshot_dir: None,
        }
    }

    /// Directory that `POST /sessions/{id}/snapshot` writes into.
    pub fn with_snapshot_dir(mut self, dir: PathBuf) -> Self {
        self.snapshot_dir = Some(dir);
        self
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown-session", format!("no session `{id}`")))
    }
}

/// An error response: `{"error": kind, "message": text, ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": kind, "message": message.into() }),
        }
    }

    fn not_for(kind: SessionKind, what: &str) -> Self {
        let k = match kind {
            SessionKind::Network => "network",
            SessionKind::Classifier => "classifier",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "wrong-session-kind", format!("{what} is not available on {k} sessions"))
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::UnknownNetwork(_) | Error::UnknownDiagram(_) | Error::UnknownTaxonomy(_) => StatusCode::NOT_FOUND,
        Error::ConflictingInstantiation(_)
        | Error::InconsistentEvidence
        | Error::AllMassDestroyed(_)
        | Error::StepLimitExceeded(_) => StatusCode::CONFLICT,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            status: status_for(&e),
            body: api::error_body(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Reply = Result<Json<Value>, ApiError>;
type Shared = State<Arc<AppState>>;

/// Request bodies are JSON objects.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "malformed-request", m);
    let v: Value = serde_json::from_slice(bytes).map_err(|e| bad(e.to_string()))?;
    if !v.is_object() {
        return Err(bad("expected a JSON object".into()));
    }
    serde_json::from_value(v).map_err(|e| bad(e.to_string()))
}

fn check_revision(headers: &HeaderMap, current: u64) -> Result<(), ApiError> {
    let Some(v) = headers.get("if-match") else {
        return Ok(());
    };
    let text = v.to_str().unwrap_or("").trim().trim_matches('"');
    match text.parse::<u64>() {
        Ok(r) if r == current => Ok(()),
        Ok(r) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale-revision",
            format!("expected revision {r}, session is at {current}"),
        )),
        Err(_) => Err(ApiError::new(StatusCode::BAD_REQUEST, "malformed-request", format!("bad If-Match value `{text}`"))),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/model", get(model_summary))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/beliefs", get(beliefs))
        .route("/sessions/{id}/evidence", post(assert_evidence).get(list_evidence))
        .route("/sessions/{id}/evidence/{node}", delete(retract_evidence))
        .route("/sessions/{id}/mpe", get(mpe))
        .route("/sessions/{id}/impact", get(impact))
        .route("/sessions/{id}/whatif", post(whatif))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/snapshot", get(snapshot).post(save_snapshot))
        .route("/diagrams/{name}/solve", post(solve_diagram))
        .with_state(state)
}

async fn model_summary(State(st): Shared) -> Json<Value> {
    Json(api::model_summary(&st.model))
}

async fn create_session(State(st): Shared, bytes: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateSession = body(&bytes)?;
    let engine = match req.kind {
        SessionKind::Network => Engine::Network(Box::new(Session::open(&st.model, &req.name)?)),
        SessionKind::Classifier => {
            let config = req.config();
            config.validate()?;
            Engine::Classifier(Box::new(Controller::new(&st.model, &req.name, config)?))
        }
    };
    let id = format!("s{}", st.next_id.fetch_add(1, Ordering::Relaxed));
    let handle = SessionHandle {
        id: id.clone(),
        model: st.model.source_hash.clone(),
        kind: req.kind,
        name: req.name,
        created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        revision: 0,
    };
    log::info!("opened {} session {id} on `{}`", match req.kind {
        SessionKind::Network => "network",
        SessionKind::Classifier => "classifier",
    }, handle.name);
    let out = json!(handle);
    st.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(Entry { handle, engine })));
    Ok((StatusCode::CREATED, Json(out)))
}

async fn list_sessions(State(st): Shared) -> Json<Value> {
    let handles: Vec<SessionHandle> =
        st.sessions.read().unwrap().values().map(|e| e.lock().unwrap().handle.clone()).collect();
    Json(json!(handles))
}

async fn get_session(State(st): Shared, Path(id): Path<String>) -> Reply {
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    Ok(Json(json!(e.handle)))
}

async fn delete_session(State(st): Shared, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    st.entry(&id)?;
    st.sessions.write().unwrap().remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

fn beliefs_of(e: &Entry) -> Value {
    match &e.engine {
        Engine::Network(s) => json!({ "revision": e.handle.revision, "beliefs": s.beliefs() }),
        Engine::Classifier(c) => {
            let t = c.taxonomy();
            let singletons: BTreeMap<&String, f64> = t.singletons.iter().zip(t.weights()).map(|(n, w)| (n, *w)).collect();
            json!({
                "revision": e.handle.revision,
                "beliefs": t.class_beliefs(),
                "singletons": singletons,
                "statuses": c.status(),
            })
        }
    }
}

async fn beliefs(State(st): Shared, Path(id): Path<String>) -> Reply {
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    Ok(Json(beliefs_of(&e)))
}

#[derive(Debug, Deserialize)]
struct EvidenceBody {
    /// Classifier sessions only: the knowledge group the finding belongs to.
    #[serde(default)]
    network: Option<String>,
    #[serde(flatten)]
    finding: FindingBody,
}

async fn assert_evidence(State(st): Shared, Path(id): Path<String>, headers: HeaderMap, bytes: Bytes) -> Reply {
    let req: EvidenceBody = body(&bytes)?;
    let entry = st.entry(&id)?;
    let mut e = entry.lock().unwrap();
    check_revision(&headers, e.handle.revision)?;
    let finding = req.finding.finding()?;
    let out = match &mut e.engine {
        Engine::Network(s) => {
            let delta = s.assert_evidence(&req.finding.node, finding)?;
            json!({ "changes": delta.changes })
        }
        Engine::Classifier(c) => {
            let network = req.network.ok_or_else(|| Error::InvalidFinding {
                node: req.finding.node.clone(),
                reason: "classifier evidence needs a `network`".into(),
            })?;
            let session = c.session(&network).ok_or_else(|| Error::UnknownNetwork(network.clone()))?;
            Evidence::new().with(req.finding.node.clone(), finding).resolve(&session.network().original)?;
            c.push_feed([FeedItem {
                network,
                node: req.finding.node,
                value: req.finding.value,
                likelihood: req.finding.likelihood,
            }]);
            json!({ "queued": c.pending() })
        }
    };
    e.handle.revision += 1;
    let mut out = out;
    out["revision"] = json!(e.handle.revision);
    Ok(Json(out))
}

async fn list_evidence(State(st): Shared, Path(id): Path<String>) -> Reply {
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    match &e.engine {
        Engine::Network(s) => {
            let findings: Vec<Value> = s.findings().iter().map(|(n, f)| finding_json(n, f)).collect();
            Ok(Json(json!({ "revision": e.handle.revision, "findings": findings })))
        }
        Engine::Classifier(_) => Err(ApiError::not_for(SessionKind::Classifier, "evidence listing")),
    }
}

fn finding_json(node: &str, f: &Finding) -> Value {
    match f {
        Finding::Instantiated(v) => json!({ "node": node, "value": v }),
        Finding::Virtual(l) => json!({ "node": node, "likelihood": l }),
    }
}

async fn retract_evidence(
    State(st): Shared,
    Path((id, node)): Path<(String, String)>,
    headers: HeaderMap,
) -> Reply {
    let entry = st.entry(&id)?;
    let mut e = entry.lock().unwrap();
    check_revision(&headers, e.handle.revision)?;
    let Engine::Network(s) = &mut e.engine else {
        return Err(ApiError::not_for(SessionKind::Classifier, "retraction"));
    };
    let delta = s.retract_evidence(&node)?;
    e.handle.revision += 1;
    Ok(Json(json!({ "changes": delta.changes, "revision": e.handle.revision })))
}

async fn mpe(State(st): Shared, Path(id): Path<String>) -> Reply {
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    let Engine::Network(s) = &e.engine else {
        return Err(ApiError::not_for(SessionKind::Classifier, "mpe"));
    };
    Ok(Json(json!(s.mpe()?)))
}

#[derive(Debug, Deserialize)]
struct ImpactQuery {
    target: String,
}

async fn impact(
    State(st): Shared,
    Path(id): Path<String>,
    q: Result<Query<ImpactQuery>, QueryRejection>,
) -> Reply {
    let Query(q) = q.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed-request", e.body_text()))?;
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    let report = match &e.engine {
        Engine::Network(s) => s.impact(&q.target)?,
        Engine::Classifier(c) => c.suggest_evidence(&q.target)?,
    };
    Ok(Json(json!(report)))
}

async fn whatif(State(st): Shared, Path(id): Path<String>, bytes: Bytes) -> Reply {
    let req: WhatIf = body(&bytes)?;
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    let Engine::Network(s) = &e.engine else {
        return Err(ApiError::not_for(SessionKind::Classifier, "whatif"));
    };
    let beliefs = s.whatif(&api::findings(&req.findings)?)?;
    Ok(Json(json!({ "revision": e.handle.revision, "beliefs": beliefs })))
}

async fn step(State(st): Shared, Path(id): Path<String>, headers: HeaderMap) -> Reply {
    let entry = st.entry(&id)?;
    let mut e = entry.lock().unwrap();
    check_revision(&headers, e.handle.revision)?;
    let Engine::Classifier(c) = &mut e.engine else {
        return Err(ApiError::not_for(SessionKind::Network, "stepping"));
    };
    let events = if c.has_work() {
        if c.steps() >= c.config().max_steps {
            return Err(Error::StepLimitExceeded(c.config().max_steps).into());
        }
        c.step()?
    } else {
        Vec::new()
    };
    let done = !c.has_work();
    let established = c.most_specific();
    let changed = !events.is_empty();
    if changed {
        e.handle.revision += 1;
    }
    Ok(Json(json!({
        "revision": e.handle.revision,
        "events": events,
        "done": done,
        "established": established,
    })))
}

async fn trace(State(st): Shared, Path(id): Path<String>) -> Reply {
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    let Engine::Classifier(c) = &e.engine else {
        return Err(ApiError::not_for(SessionKind::Network, "the trace"));
    };
    Ok(Json(json!(c.trace())))
}

fn snapshot_of(e: &Entry) -> Value {
    match &e.engine {
        Engine::Network(s) => {
            let findings: Vec<Value> = s.findings().iter().map(|(n, f)| finding_json(n, f)).collect();
            json!({ "handle": e.handle, "findings": findings, "beliefs": s.beliefs() })
        }
        Engine::Classifier(c) => json!({ "handle": e.handle, "report": c.report() }),
    }
}

async fn snapshot(State(st): Shared, Path(id): Path<String>) -> Reply {
    let entry = st.entry(&id)?;
    let e = entry.lock().unwrap();
    Ok(Json(snapshot_of(&e)))
}

async fn save_snapshot(State(st): Shared, Path(id): Path<String>) -> Reply {
    let Some(dir) = &st.snapshot_dir else {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "no-snapshot-dir",
            "the server was started without --snapshot-dir",
        ));
    };
    let entry = st.entry(&id)?;
    let doc = snapshot_of(&entry.lock().unwrap());
    let path = dir.join(format!("{id}.json"));
    let text = serde_json::to_string_pretty(&doc).expect("snapshot serializes");
    std::fs::write(&path, text)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io-error", format!("{}: {e}", path.display())))?;
    Ok(Json(json!({ "path": path })))
}

async fn solve_diagram(State(st): Shared, Path(name): Path<String>, bytes: Bytes) -> Reply {
    let req: SolveRequest = if bytes.is_empty() { body(&Bytes::from_static(b"{}"))? } else { body(&bytes)? };
    let diagram = st.model.diagram(&name)?;
    let evidence = api::evidence(&req.evidence)?;
    let options = SolveOptions { prune: req.prune, ..SolveOptions::default() };
    Ok(Json(json!(solve(diagram, &evidence, &options)?)))
}

/// Serves `router` (plus static files, if given) until ctrl-c.
pub async fn serve(state: AppState, port: u16, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let mut app = router(Arc::new(state));
    if let Some(dir) = static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
