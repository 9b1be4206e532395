//! HTTP service exposing diagnosis sessions.
//!
//! Mutations of one session are serialized by a per-session write lock and
//! journaled (in memory, and on disk when a journal directory is set) before
//! the response is sent. Reads take the read lock, so they never see a
//! half-applied observation.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use anyhow::Context as _;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use possdiag_core::dsl::{parse_model, Diagnostic};
use possdiag_core::model::{observable_outputs, ParamDecl, ParamKind, SystemModel};
use possdiag_core::session::{
    journal_to_text, replay, Applied, BoardView, NamedDegree, ObservationRecord, ProbeView, Session, SessionError,
    Verdict,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// A model file found in the model directory.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub name: String,
    pub text: String,
    pub model: SystemModel,
}

struct Entry {
    session: Session,
    /// Journal events already on disk.
    written: usize,
}

pub struct AppState {
    models: BTreeMap<String, ModelEntry>,
    sessions: RwLock<BTreeMap<String, Arc<RwLock<Entry>>>>,
    next_id: AtomicU64,
    journal_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(models: Vec<ModelEntry>, journal_dir: Option<PathBuf>) -> AppState {
        AppState {
            models: models.into_iter().map(|m| (m.name.clone(), m)).collect(),
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            journal_dir,
        }
    }

    /// Rebuilds every session journaled in the journal directory.
    pub fn restore(&self) -> anyhow::Result<usize> {
        let Some(dir) = &self.journal_dir else { return Ok(0) };
        let mut n = 0;
        for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let session = replay(&text).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e))?;
            let written = session.journal().len();
            self.sessions
                .write()
                .unwrap()
                .insert(session.id.clone(), Arc::new(RwLock::new(Entry { session, written })));
            n += 1;
        }
        Ok(n)
    }

    fn fresh_id(&self) -> String {
        let sessions = self.sessions.read().unwrap();
        loop {
            let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
            if !sessions.contains_key(&id) {
                return id;
            }
        }
    }

    fn session(&self, id: &str) -> Result<Arc<RwLock<Entry>>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{}`", id)))
    }

    /// Appends the unwritten tail of the journal to disk.
    fn persist(&self, entry: &mut Entry) -> Result<(), ApiError> {
        let Some(dir) = &self.journal_dir else {
            entry.written = entry.session.journal().len();
            return Ok(());
        };
        let tail = journal_to_text(&entry.session.journal()[entry.written..]);
        let path = dir.join(format!("{}.jsonl", entry.session.id));
        let result = OpenOptions::new().create(true).append(true).open(&path).and_then(|mut f| {
            f.write_all(tail.as_bytes())?;
            f.sync_data()
        });
        result.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "journal", e.to_string()))?;
        entry.written = entry.session.journal().len();
        Ok(())
    }
}

/// Loads every `*.pdm` file of `dir`. Files that fail to parse are skipped
/// with a warning.
pub fn load_models(dir: &Path) -> anyhow::Result<Vec<ModelEntry>> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read model directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("pdm"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        match parse_model(&text, &path.display().to_string()) {
            Ok(parsed) => out.push(ModelEntry { name, text, model: parsed.model }),
            Err(diags) => {
                for d in diags {
                    tracing::warn!("{}", d);
                }
            }
        }
    }
    Ok(out)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/board", get(board))
        .route("/sessions/{id}/probes", get(probes))
        .route("/sessions/{id}/observations", post(add_observation))
        .route("/sessions/{id}/whatif", post(what_if))
        .route("/sessions/{id}/verdicts", post(add_verdict))
        .route("/sessions/{id}/journal", get(journal))
        .route("/models", get(list_models))
        .route("/models/{name}/topology", get(topology))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    revision: Option<u64>,
    diagnostics: Vec<Diagnostic>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: String) -> ApiError {
        ApiError { status, kind, message, revision: None, diagnostics: Vec::new() }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        let message = e.to_string();
        match e {
            SessionError::Parse(diagnostics) => {
                ApiError { diagnostics, ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "parse", message) }
            }
            SessionError::Observation(_) => ApiError::new(StatusCode::CONFLICT, "observation_conflict", message),
            SessionError::Engine(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "nothing_to_explain", message),
            SessionError::UnknownHypothesis(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_hypothesis", message),
            SessionError::Problem(_) | SessionError::UnknownLevel(_) | SessionError::ZeroLevel(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_observation", message)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(r) = self.revision {
            body["revision"] = json!(r);
        }
        if !self.diagnostics.is_empty() {
            body["diagnostics"] = json!(self.diagnostics);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    /// Name of a model in the model directory, or a label for `model_text`.
    pub model: String,
    #[serde(default)]
    pub model_text: Option<String>,
    #[serde(default)]
    pub observations: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub revision: u64,
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<Response> {
    let text = match req.model_text {
        Some(t) => t,
        None => app
            .models
            .get(&req.model)
            .map(|m| m.text.clone())
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_model", format!("no model `{}`", req.model)))?,
    };
    let id = app.fresh_id();
    let session = Session::create(&id, &req.model, &text, &req.observations)?;
    let revision = session.revision();
    let mut entry = Entry { session, written: 0 };
    app.persist(&mut entry)?;
    app.sessions.write().unwrap().insert(id.clone(), Arc::new(RwLock::new(entry)));
    tracing::info!(session = %id, model = %req.model, "session created");
    Ok((StatusCode::CREATED, Json(Created { session_id: id, revision })).into_response())
}

#[derive(Debug, Deserialize)]
pub struct Since {
    pub since: Option<u64>,
}

/// Board plus whether it moved past the caller's revision token.
#[derive(Debug, Serialize, Deserialize)]
pub struct BoardResponse {
    pub session_id: String,
    pub changed: bool,
    #[serde(flatten)]
    pub board: BoardView,
}

async fn board(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<Since>,
) -> ApiResult<Json<BoardResponse>> {
    let entry = app.session(&id)?;
    let entry = entry.read().unwrap();
    let board = entry.session.board();
    Ok(Json(BoardResponse { session_id: id, changed: q.since != Some(board.revision), board }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbesResponse {
    pub revision: u64,
    pub probes: Vec<ProbeView>,
}

async fn probes(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ProbesResponse>> {
    let entry = app.session(&id)?;
    let entry = entry.read().unwrap();
    Ok(Json(ProbesResponse { revision: entry.session.revision(), probes: entry.session.probes() }))
}

/// Mutation body: the payload plus an optional revision the client believes
/// is current. A mismatch is refused with 409.
#[derive(Debug, Deserialize)]
pub struct Guarded<T> {
    #[serde(flatten)]
    pub body: T,
    #[serde(default)]
    pub expected_revision: Option<u64>,
}

fn check_revision(session: &Session, expected: Option<u64>) -> ApiResult<()> {
    match expected {
        Some(r) if r != session.revision() => Err(ApiError {
            revision: Some(session.revision()),
            ..ApiError::new(
                StatusCode::CONFLICT,
                "stale_revision",
                format!("session is at revision {}, not {}", session.revision(), r),
            )
        }),
        _ => Ok(()),
    }
}

async fn add_observation(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<Guarded<ObservationRecord>>,
) -> ApiResult<Json<Applied>> {
    let entry = app.session(&id)?;
    let mut entry = entry.write().unwrap();
    check_revision(&entry.session, req.expected_revision)?;
    let applied = entry.session.add_observation(req.body.clone())?;
    app.persist(&mut entry)?;
    if applied.changed {
        tracing::info!(session = %id, revision = applied.revision, observation = %req.body, "observation added");
    }
    Ok(Json(applied))
}

async fn what_if(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<ObservationRecord>,
) -> ApiResult<Json<BoardView>> {
    let entry = app.session(&id)?;
    let entry = entry.read().unwrap();
    Ok(Json(entry.session.what_if(&req)?))
}

async fn add_verdict(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<Guarded<Verdict>>,
) -> ApiResult<Json<Applied>> {
    let entry = app.session(&id)?;
    let mut entry = entry.write().unwrap();
    check_revision(&entry.session, req.expected_revision)?;
    let applied = entry.session.add_verdict(req.body)?;
    app.persist(&mut entry)?;
    Ok(Json(applied))
}

async fn journal(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let entry = app.session(&id)?;
    let text = entry.read().unwrap().session.journal_text();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub components: usize,
    pub links: usize,
    pub observable_outputs: usize,
}

async fn list_models(State(app): State<Arc<AppState>>) -> Json<Vec<ModelSummary>> {
    Json(
        app.models
            .values()
            .map(|m| ModelSummary {
                name: m.name.clone(),
                components: m.model.components.len(),
                links: m.model.links.len(),
                observable_outputs: observable_outputs(&m.model).len(),
            })
            .collect(),
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PortView {
    pub id: String,
    pub kind: ParamKind,
    pub states: Vec<String>,
    pub observable: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComponentView {
    pub id: String,
    pub junction: bool,
    pub config_modes: Vec<String>,
    pub fault_modes: Vec<String>,
    pub inputs: Vec<PortView>,
    pub outputs: Vec<PortView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LinkView {
    pub source: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AliasView {
    pub alias: String,
    pub level: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub components: Vec<ComponentView>,
    pub links: Vec<LinkView>,
    /// `component.output` of every observable output.
    pub observable: Vec<String>,
    pub levels: Vec<NamedDegree>,
    pub absence_aliases: Vec<AliasView>,
}

fn port_view(p: &ParamDecl) -> PortView {
    PortView { id: p.id.clone(), kind: p.kind, states: p.states.clone(), observable: p.observable }
}

pub fn topology_of(name: &str, model: &SystemModel) -> Topology {
    Topology {
        name: name.to_string(),
        components: model
            .components
            .iter()
            .map(|c| ComponentView {
                id: c.id.clone(),
                junction: c.junction,
                config_modes: c.config_modes.clone(),
                fault_modes: c.fault_modes.clone(),
                inputs: c.inputs.iter().map(port_view).collect(),
                outputs: c.outputs.iter().map(port_view).collect(),
            })
            .collect(),
        links: model
            .links
            .iter()
            .map(|l| LinkView { source: l.source.to_string(), targets: l.targets.iter().map(|t| t.to_string()).collect() })
            .collect(),
        observable: observable_outputs(model).iter().map(|p| p.to_string()).collect(),
        levels: model.scale.levels().iter().map(|l| NamedDegree::new(&model.scale, l.value)).collect(),
        absence_aliases: model
            .scale
            .absence_aliases()
            .iter()
            .map(|(a, l)| AliasView { alias: a.clone(), level: l.clone() })
            .collect(),
    }
}

async fn topology(State(app): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> ApiResult<Json<Topology>> {
    let m = app
        .models
        .get(&name)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_model", format!("no model `{}`", name)))?;
    Ok(Json(topology_of(&m.name, &m.model)))
}
