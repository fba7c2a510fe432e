//! Session-oriented HTTP and WebSocket service.
//!
//! Each session owns a scene, seed sets, peel windows and the last frame.
//! Mutations are serialized by the session lock and bump its revision;
//! renders run on a snapshot outside the lock. Stream subscribers receive
//! `{"type":"frame","revision":n,"png_base64":...}` after every mutation.

pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use base64::Engine;
use futures_util::{SinkExt, StreamExt};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use crate::config::PeelFile;
use crate::enhance::DEFAULT_MAP_SIZE;
use crate::error::{Error, Result};
use crate::render::Frame;

pub use session::{ApiError, ApiResult, Command, Session};

pub const REVISION_HEADER: &str = "x-revision";
/// Accept value selecting tightly packed 8-bit RGBA instead of PNG.
pub const RAW_RGBA: &str = "application/x-rgba";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    pub map_size: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { max_sessions: 16, map_size: DEFAULT_MAP_SIZE }
    }
}

struct SessionHandle {
    session: Mutex<Session>,
    pushes: broadcast::Sender<Arc<String>>,
    last_pushed: Mutex<u64>,
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState(Arc::new(Inner { config, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) }))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<SessionHandle>> {
        self.0
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({"error": self.message}))).into_response()
    }
}

pub fn router(config: ServiceConfig) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/camera", put(put_camera))
        .route("/sessions/{id}/iso", put(put_iso))
        .route("/sessions/{id}/crop", put(put_crop))
        .route("/sessions/{id}/peel-windows", post(post_peel).delete(delete_peel))
        .route("/sessions/{id}/frame", get(get_frame))
        .route("/sessions/{id}/pick", post(post_pick))
        .route("/sessions/{id}/segment", post(post_segment))
        .route("/sessions/{id}/structures", post(post_structure).get(get_structures))
        .route("/sessions/{id}/export", post(post_export))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(AppState::new(config))
}

pub async fn serve(listener: TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config)).await
}

/// Binds `addr` and serves until the process exits.
pub fn serve_blocking(addr: &str, config: ServiceConfig) -> Result<()> {
    let addr: SocketAddr = addr.parse().map_err(|e| Error::Config(format!("listen address {addr:?}: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(async {
        let listener = TcpListener::bind(addr).await.map_err(|e| Error::io(addr.to_string(), e))?;
        eprintln!("listening on {}", listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?);
        serve(listener, config).await.map_err(|e| Error::io(addr.to_string(), e))
    })
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

fn with_revision(revision: u64, value: Value) -> Response {
    let mut resp = Json(value).into_response();
    resp.headers_mut().insert(REVISION_HEADER, revision.into());
    resp
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("blocking task panicked")
}

/// Runs one command against a session and schedules a stream push when it
/// mutated something.
async fn run_command(state: &AppState, id: &str, cmd: Command) -> ApiResult<(u64, Value)> {
    let handle = state.session(id)?;
    let mutates = cmd.mutates();
    let h = handle.clone();
    let (revision, value) = blocking(move || {
        let mut s = h.session.lock().unwrap();
        s.apply(cmd).map(|v| (s.revision, v))
    })
    .await?;
    if mutates {
        schedule_push(handle);
    }
    Ok((revision, value))
}

async fn command_response(state: AppState, id: String, cmd: ApiResult<Command>) -> Response {
    match async { run_command(&state, &id, cmd?).await }.await {
        Ok((rev, v)) => with_revision(rev, v),
        Err(e) => e.into_response(),
    }
}

/// Frame for the current revision, rendered from a snapshot if not cached.
async fn current_frame(handle: Arc<SessionHandle>) -> (u64, Arc<Frame>) {
    let job = {
        let s = handle.session.lock().unwrap();
        if let Some(f) = s.cached_frame() {
            return (s.revision, f);
        }
        s.render_job()
    };
    let revision = job.revision;
    let frame = Arc::new(blocking(move || job.run()).await);
    handle.session.lock().unwrap().store_frame(revision, frame.clone());
    (revision, frame)
}

fn push_message(revision: u64, frame: &Frame) -> Option<String> {
    let png = frame.image.encode_png().ok()?;
    let b64 = base64::engine::general_purpose::STANDARD.encode(png);
    Some(json!({"type": "frame", "revision": revision, "png_base64": b64}).to_string())
}

/// Renders and broadcasts the latest revision; older renders that finish
/// late are dropped so pushed revisions only increase.
fn schedule_push(handle: Arc<SessionHandle>) {
    if handle.pushes.receiver_count() == 0 {
        return;
    }
    tokio::spawn(async move {
        let (revision, frame) = current_frame(handle.clone()).await;
        let Some(msg) = blocking(move || push_message(revision, &frame)).await else {
            return;
        };
        let mut last = handle.last_pushed.lock().unwrap();
        if revision > *last || *last == 0 {
            *last = revision;
            let _ = handle.pushes.send(Arc::new(msg));
        }
    });
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Response {
    let result = async {
        let create: session::CreateBody = parse_body(&body)?;
        let map_size = state.0.config.map_size;
        let session = blocking(move || Session::create(create, map_size)).await?;
        let mut sessions = state.0.sessions.lock().unwrap();
        if sessions.len() >= state.0.config.max_sessions {
            return Err(ApiError { status: 503, message: "session limit reached".into() });
        }
        let id = format!("s{}", state.0.next_id.fetch_add(1, Ordering::Relaxed));
        let (tx, _) = broadcast::channel(16);
        sessions.insert(
            id.clone(),
            Arc::new(SessionHandle { session: Mutex::new(session), pushes: tx, last_pushed: Mutex::new(0) }),
        );
        Ok(id)
    }
    .await;
    match result {
        Ok(id) => with_revision(0, json!({"id": id, "revision": 0})),
        Err(e) => e.into_response(),
    }
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.0.sessions.lock().unwrap().remove(&id) {
        Some(_) => StatusCode::NO_CONTENT.into_response(),
        None => ApiError::not_found(format!("unknown session {id:?}")).into_response(),
    }
}

async fn put_camera(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    command_response(s, id, parse_body(&body).map(Command::Camera)).await
}

async fn put_iso(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    command_response(s, id, parse_body(&body).map(Command::Iso)).await
}

async fn put_crop(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    command_response(s, id, parse_body(&body).map(Command::Crop)).await
}

async fn post_peel(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    command_response(s, id, parse_body::<PeelFile>(&body).map(Command::PeelWindows)).await
}

async fn delete_peel(State(s): State<AppState>, Path(id): Path<String>) -> Response {
    command_response(s, id, Ok(Command::ClearPeelWindows)).await
}

async fn post_pick(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    command_response(s, id, parse_body(&body).map(Command::Pick)).await
}

async fn post_segment(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    let cmd = if body.iter().all(u8::is_ascii_whitespace) {
        Ok(Command::Segment(None))
    } else {
        parse_body(&body).map(|b| Command::Segment(Some(b)))
    };
    command_response(s, id, cmd).await
}

async fn post_structure(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    command_response(s, id, parse_body(&body).map(Command::Structures)).await
}

async fn post_export(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    command_response(s, id, parse_body(&body).map(Command::Export)).await
}

async fn get_structures(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.session(&id) {
        Ok(h) => {
            let s = h.session.lock().unwrap();
            with_revision(s.revision, json!({"structures": s.structures(), "revision": s.revision}))
        }
        Err(e) => e.into_response(),
    }
}

async fn get_frame(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    let handle = match state.session(&id) {
        Ok(h) => h,
        Err(e) => return e.into_response(),
    };
    let (revision, frame) = current_frame(handle).await;
    let raw = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains(RAW_RGBA));
    let (content_type, bytes) = if raw {
        (RAW_RGBA, frame.image.to_rgba8_bytes())
    } else {
        match blocking(move || frame.image.encode_png()).await {
            Ok(png) => ("image/png", png),
            Err(e) => return ApiError { status: 500, message: e.to_string() }.into_response(),
        }
    };
    let mut resp = Response::new(Body::from(bytes));
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, content_type.parse().unwrap());
    h.insert(REVISION_HEADER, revision.into());
    let [w, hgt] = {
        let s = state.session(&id);
        s.map(|s| s.session.lock().unwrap().scene.camera.image_dims).unwrap_or([0, 0])
    };
    h.insert("x-width", w.into());
    h.insert("x-height", hgt.into());
    resp
}

async fn stream(State(state): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    match state.session(&id) {
        Ok(handle) => ws.on_upgrade(move |socket| stream_session(state, id, handle, socket)),
        Err(e) => e.into_response(),
    }
}

async fn stream_session(state: AppState, id: String, handle: Arc<SessionHandle>, socket: WebSocket) {
    let mut pushes = handle.pushes.subscribe();
    let (mut tx, mut rx) = socket.split();
    let (revision, frame) = current_frame(handle.clone()).await;
    if let Some(msg) = blocking(move || push_message(revision, &frame)).await {
        if tx.send(Message::Text(msg.into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            incoming = rx.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<Command>(text.as_str()) {
                    Err(e) => json!({"type": "reply", "ok": false, "status": 400, "error": format!("invalid command: {e}")}),
                    Ok(cmd) => match run_command(&state, &id, cmd).await {
                        Ok((rev, v)) => json!({"type": "reply", "ok": true, "revision": rev, "result": v}),
                        Err(e) => json!({"type": "reply", "ok": false, "status": e.status, "error": e.message}),
                    },
                };
                if tx.send(Message::Text(reply.to_string().into())).await.is_err() {
                    return;
                }
            }
            pushed = pushes.recv() => {
                match pushed {
                    Ok(msg) => {
                        if tx.send(Message::Text(msg.as_str().into())).await.is_err() {
                            return;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return,
                }
            }
        }
    }
}
