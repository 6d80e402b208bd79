//! HTTP routes over a shared [`Workspace`]. Bodies use the same kebab-case surface form
//! as spec files, in JSON.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dashsnap_core::lifecycle::{infer_freshness, Clock, LifecycleError, SystemClock, VirtualClock};
use dashsnap_core::model::{Duration, SourceSpan, ValidationReport};
use dashsnap_core::platform::MessageId;
use dashsnap_core::spec_io::{
    self, component_to_json, locate, parse_component_request, parse_dashboard, parse_filter_request,
    parse_manual_edits, parse_snapshot_draft, selection_to_json, snapshot_to_json, ParseError,
};
use dashsnap_core::store::SourceRef;
use dashsnap_core::workspace::{ErrorClass, Workspace, WorkspaceError};

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<SourceSpan>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<dashsnap_core::model::Violation>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.into(),
            message: message.into(),
            span: None,
            violations: Vec::new(),
        }
    }

    fn invalid(report: ValidationReport) -> Self {
        let first = report.violations.first();
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: first.map_or("INVALID".into(), |v| v.code.as_str().into()),
            message: first.map_or(String::new(), |v| v.message.clone()),
            span: first.and_then(|v| v.span),
            violations: report.violations,
        }
    }

    /// `body` is the request text, used to place validation errors.
    fn workspace(e: WorkspaceError, body: Option<&str>) -> Self {
        if let WorkspaceError::Lifecycle(LifecycleError::Invalid(report)) = e {
            let report = match body {
                Some(text) => locate(report, text),
                None => report,
            };
            return ApiError::invalid(report);
        }
        let status = match e.class() {
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            ErrorClass::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::Conflict => StatusCode::CONFLICT,
        };
        ApiError::new(status, &e.code(), e.to_string())
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: e.code.as_str().into(),
            message: e.message.clone(),
            span: Some(e.span()),
            violations: vec![e.to_violation()],
        }
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        ApiError::workspace(e, None)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = serde_json::to_value(&self).unwrap_or_default();
        body["status"] = json!(self.status.as_u16());
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T = Response> = Result<T, ApiError>;

#[derive(Clone)]
pub enum ClockMode {
    Wall,
    Virtual(Arc<VirtualClock>),
}

pub struct AppState {
    workspace: Mutex<Workspace>,
    pub clock_mode: ClockMode,
    wall: SystemClock,
    /// Where to persist after every change; `None` keeps the store in memory.
    pub store_path: Option<PathBuf>,
}

impl AppState {
    pub fn new(workspace: Workspace, clock_mode: ClockMode, store_path: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            workspace: Mutex::new(workspace),
            clock_mode,
            wall: SystemClock,
            store_path,
        })
    }

    pub fn clock(&self) -> &dyn Clock {
        match &self.clock_mode {
            ClockMode::Wall => &self.wall,
            ClockMode::Virtual(c) => c.as_ref(),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Workspace> {
        self.workspace.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn persist(&self, ws: &Workspace) -> ApiResult<()> {
        match &self.store_path {
            Some(p) => ws
                .save(p)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORE_IO", e.to_string())),
            None => Ok(()),
        }
    }

    /// One scheduler pass; used by the background loop and the clock routes.
    pub fn tick(&self) -> ApiResult<dashsnap_core::workspace::TickOutcome> {
        let mut ws = self.lock();
        let out = ws.tick(self.clock());
        if !out.report.updates.is_empty() {
            self.persist(&ws)?;
        }
        Ok(out)
    }
}

type AppStateRef = Arc<AppState>;

fn identity(headers: &HeaderMap, name: &str) -> ApiResult<String> {
    headers
        .get(name)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "MISSING_IDENTITY", format!("the `{name}` header is required")))
}

fn json_body<T: for<'de> Deserialize<'de>>(body: &str) -> ApiResult<T> {
    serde_json::from_str(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_BODY", e.to_string()))
}

fn created(v: Value) -> Response {
    (StatusCode::CREATED, Json(v)).into_response()
}

fn ok<T: Serialize>(v: T) -> Response {
    Json(v).into_response()
}

pub fn router(state: AppStateRef) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({"ok": true})) }))
        .route("/sources", post(add_source))
        .route("/dashboards", get(list_dashboards).post(add_dashboard))
        .route("/dashboards/:dashboard/panels", get(list_panels))
        .route(
            "/dashboards/:dashboard/panels/:panel/applicable-templates",
            get(applicable_templates),
        )
        .route("/templates", get(list_templates))
        .route("/components", post(create_component))
        .route("/freshness", post(freshness))
        .route("/lint", post(lint))
        .route("/snapshots", get(list_snapshots).post(compose))
        .route("/snapshots/:id", get(get_snapshot))
        .route("/snapshots/:id/render", get(render))
        .route("/snapshots/:id/publish", post(publish))
        .route("/snapshots/:id/update", post(update))
        .route("/snapshots/:id/dissemination", get(dissemination_one))
        .route("/dissemination", get(dissemination_all))
        .route("/channels", get(list_channels).post(add_channel))
        .route("/channels/:id/messages", get(channel_messages))
        .route("/messages/:id", get(view_message))
        .route("/messages/:id/filters", post(apply_filter))
        .route("/messages/:id/refresh", post(refresh))
        .route("/messages/:id/reactions", post(react))
        .route("/tick", post(tick))
        .route("/clock", get(get_clock))
        .route("/clock/advance", post(advance_clock))
        .with_state(state)
}

#[derive(Deserialize)]
struct SourceBody {
    id: String,
    path: PathBuf,
    #[serde(default)]
    schema: Option<PathBuf>,
}

async fn add_source(State(st): State<AppStateRef>, body: String) -> ApiResult {
    let b: SourceBody = json_body(&body)?;
    let mut ws = st.lock();
    ws.add_source(&b.id, SourceRef { path: b.path, schema: b.schema });
    if let Err(e) = ws.registry.resolve(&b.id) {
        ws.registry.remove(&b.id);
        ws.store.sources.remove(&b.id);
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "DATA_SOURCE", e.to_string()));
    }
    st.persist(&ws)?;
    Ok(created(json!({"id": b.id})))
}

async fn list_dashboards(State(st): State<AppStateRef>) -> Response {
    let ws = st.lock();
    let out: Vec<Value> = ws
        .store
        .dashboards
        .values()
        .map(|d| {
            json!({
                "id": d.id,
                "title": d.title,
                "panels": d.panels.iter().map(|p| json!({"panel-id": p.panel_id, "worksheet": p.worksheet})).collect::<Vec<_>>(),
            })
        })
        .collect();
    ok(out)
}

async fn add_dashboard(State(st): State<AppStateRef>, body: String) -> ApiResult {
    let d = parse_dashboard(&body)?;
    let mut ws = st.lock();
    let out = spec_io::dashboard_to_json(&d);
    ws.add_dashboard(d);
    st.persist(&ws)?;
    Ok(created(out))
}

async fn list_panels(State(st): State<AppStateRef>, Path(dashboard): Path<String>) -> ApiResult {
    let ws = st.lock();
    let d = ws
        .store
        .dashboards
        .get(&dashboard)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_DASHBOARD", format!("no dashboard {dashboard:?}")))?;
    Ok(ok(d.panels.iter().map(selection_to_json).collect::<Vec<_>>()))
}

async fn applicable_templates(State(st): State<AppStateRef>, Path((dashboard, panel)): Path<(String, String)>) -> ApiResult {
    let ws = st.lock();
    Ok(ok(ws.applicable_templates(&dashboard, &panel)?))
}

async fn list_templates(State(st): State<AppStateRef>) -> Response {
    ok(st.lock().catalog.designs().to_vec())
}

async fn create_component(State(st): State<AppStateRef>, body: String) -> ApiResult {
    let req = parse_component_request(&body)?;
    let ws = st.lock();
    let c = ws
        .create_component(&req.dashboard, &req.panel, req.options)
        .map_err(|e| ApiError::workspace(e, Some(&body)))?;
    Ok(created(component_to_json(&c)))
}

async fn freshness(body: String) -> ApiResult {
    let draft = parse_snapshot_draft(&body)?;
    let inferred = infer_freshness(&draft.components);
    Ok(ok(json!({"inferred": inferred, "override": draft.overrides.freshness})))
}

async fn lint(State(st): State<AppStateRef>, body: String) -> Response {
    let ws = st.lock();
    let report = spec_io::lint(&body, Some(&ws.registry), &ws.catalog);
    ok(json!({"ok": report.is_empty(), "violations": report.violations}))
}

async fn list_snapshots(State(st): State<AppStateRef>) -> Response {
    let ws = st.lock();
    let out: Vec<Value> = ws
        .store
        .snapshots
        .snapshots
        .iter()
        .map(|(id, e)| {
            let s = e.current();
            json!({
                "id": id,
                "title": s.title,
                "version": s.version,
                "freshness": s.freshness,
                "next-due": e.next_due(),
            })
        })
        .collect();
    ok(out)
}

async fn compose(State(st): State<AppStateRef>, body: String) -> ApiResult {
    let draft = parse_snapshot_draft(&body)?;
    let mut ws = st.lock();
    let s = ws.compose(draft, st.clock()).map_err(|e| ApiError::workspace(e, Some(&body)))?;
    let render = ws.render(&s.id, None, st.clock())?;
    st.persist(&ws)?;
    Ok(created(json!({"snapshot": snapshot_to_json(&s), "render": render})))
}

#[derive(Deserialize)]
struct VersionQuery {
    version: Option<u32>,
}

async fn get_snapshot(State(st): State<AppStateRef>, Path(id): Path<String>, Query(q): Query<VersionQuery>) -> ApiResult {
    let ws = st.lock();
    Ok(ok(snapshot_to_json(ws.snapshot(&id, q.version)?)))
}

async fn render(State(st): State<AppStateRef>, Path(id): Path<String>, Query(q): Query<VersionQuery>) -> ApiResult {
    let ws = st.lock();
    Ok(ok(ws.render(&id, q.version, st.clock())?))
}

#[derive(Deserialize)]
struct PublishBody {
    channel: String,
    #[serde(default)]
    thread: Option<MessageId>,
}

async fn publish(State(st): State<AppStateRef>, Path(id): Path<String>, headers: HeaderMap, body: String) -> ApiResult {
    let author = identity(&headers, "author")?;
    let b: PublishBody = json_body(&body)?;
    let mut ws = st.lock();
    let mid = ws.publish(&id, &b.channel, b.thread, &author, st.clock())?;
    let msg = ws.store.platform.message(mid).cloned().map_err(WorkspaceError::from)?;
    st.persist(&ws)?;
    Ok(created(serde_json::to_value(msg).unwrap_or_default()))
}

async fn update(State(st): State<AppStateRef>, Path(id): Path<String>, headers: HeaderMap, body: String) -> ApiResult {
    let author = identity(&headers, "author")?;
    let edits = parse_manual_edits(&body)?;
    let mut ws = st.lock();
    let (version, posted) = ws
        .update_manual(&id, edits, &author, st.clock())
        .map_err(|e| ApiError::workspace(e, Some(&body)))?;
    st.persist(&ws)?;
    Ok(ok(json!({"version": version, "posted": posted})))
}

async fn dissemination_one(State(st): State<AppStateRef>, Path(id): Path<String>) -> ApiResult {
    Ok(ok(st.lock().dissemination(Some(&id))?))
}

async fn dissemination_all(State(st): State<AppStateRef>) -> ApiResult {
    Ok(ok(st.lock().dissemination(None)?))
}

async fn list_channels(State(st): State<AppStateRef>) -> Response {
    ok(st.lock().store.platform.channels.values().cloned().collect::<Vec<_>>())
}

#[derive(Deserialize)]
struct ChannelBody {
    id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    members: Vec<String>,
}

async fn add_channel(State(st): State<AppStateRef>, body: String) -> ApiResult {
    let b: ChannelBody = json_body(&body)?;
    let mut ws = st.lock();
    let name = b.name.unwrap_or_else(|| b.id.clone());
    ws.add_channel(&b.id, &name, b.members)?;
    let ch = ws.store.platform.channels[&b.id].clone();
    st.persist(&ws)?;
    Ok(created(serde_json::to_value(ch).unwrap_or_default()))
}

async fn channel_messages(State(st): State<AppStateRef>, Path(id): Path<String>) -> ApiResult {
    let ws = st.lock();
    if !ws.store.platform.channels.contains_key(&id) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_CHANNEL", format!("no channel {id:?}")));
    }
    let msgs: Vec<_> = ws.store.platform.messages.iter().filter(|m| m.channel == id).cloned().collect();
    Ok(ok(msgs))
}

async fn view_message(State(st): State<AppStateRef>, Path(id): Path<MessageId>, headers: HeaderMap) -> ApiResult {
    let viewer = identity(&headers, "viewer")?;
    let ws = st.lock();
    Ok(ok(ws.view(id, &viewer, st.clock())?))
}

async fn apply_filter(State(st): State<AppStateRef>, Path(id): Path<MessageId>, headers: HeaderMap, body: String) -> ApiResult {
    let viewer = identity(&headers, "viewer")?;
    let b: Value = json_body(&body)?;
    let component = b["component"]
        .as_str()
        .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_BODY", "`component` is required"))?
        .to_string();
    let request = parse_filter_request(&b["request"].to_string())?;
    let mut ws = st.lock();
    let state = ws.apply_filter(id, &component, &viewer, request)?;
    st.persist(&ws)?;
    Ok(ok(state))
}

async fn refresh(State(st): State<AppStateRef>, Path(id): Path<MessageId>, headers: HeaderMap) -> ApiResult {
    let viewer = identity(&headers, "viewer")?;
    let mut ws = st.lock();
    let mid = ws.refresh_for_viewer(id, &viewer, st.clock())?;
    st.persist(&ws)?;
    Ok(created(json!({"message": mid})))
}

#[derive(Deserialize)]
struct ReactionBody {
    reaction: String,
}

async fn react(State(st): State<AppStateRef>, Path(id): Path<MessageId>, body: String) -> ApiResult {
    let b: ReactionBody = json_body(&body)?;
    let mut ws = st.lock();
    let count = ws.store.platform.react(id, &b.reaction).map_err(WorkspaceError::from)?;
    st.persist(&ws)?;
    Ok(ok(json!({"reaction": b.reaction, "count": count})))
}

async fn tick(State(st): State<AppStateRef>) -> ApiResult {
    Ok(ok(st.tick()?))
}

async fn get_clock(State(st): State<AppStateRef>) -> Response {
    let mode = match st.clock_mode {
        ClockMode::Wall => "wall",
        ClockMode::Virtual(_) => "virtual",
    };
    ok(json!({"now": st.clock().now(), "mode": mode}))
}

#[derive(Deserialize)]
struct AdvanceBody {
    #[serde(default)]
    by: Option<String>,
    #[serde(default)]
    to: Option<String>,
}

/// Moves the virtual clock, then runs one scheduler pass.
async fn advance_clock(State(st): State<AppStateRef>, body: String) -> ApiResult {
    let ClockMode::Virtual(clock) = &st.clock_mode else {
        return Err(ApiError::new(StatusCode::CONFLICT, "CLOCK_NOT_VIRTUAL", "the clock can only be moved in virtual mode"));
    };
    let b: AdvanceBody = json_body(&body)?;
    let bad = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_VALUE", m);
    let target: NaiveDateTime = match (b.by, b.to) {
        (Some(by), None) => {
            let d: Duration = by.parse().map_err(|e| bad(format!("{by:?}: {e}")))?;
            let now = clock.now();
            d.add_to(now.date()).ok_or_else(|| bad("clock overflow".into()))?.and_time(now.time())
        }
        (None, Some(to)) => spec_io::parse_datetime(&to).ok_or_else(|| bad(format!("{to:?} is not a timestamp")))?,
        _ => return Err(bad("give exactly one of `by` and `to`".into())),
    };
    if target < clock.now() {
        return Err(ApiError::new(StatusCode::CONFLICT, "CLOCK_BACKWARDS", "the clock never moves backwards"));
    }
    clock.set(target);
    let out = st.tick()?;
    Ok(ok(json!({"now": clock.now(), "tick": out})))
}
