//! HTTP and WebSocket service for live games against a pursuer controller.
//!
//! Routes:
//! - `POST /sessions` creates a game and returns its [`api::SessionView`].
//! - `GET /sessions/{id}` returns the current view.
//! - `POST /sessions/{id}/moves` submits the evaders' move.
//! - `GET /sessions/{id}/log` returns the [`api::MoveLog`].
//! - `GET /sessions/{id}/stream` upgrades to a WebSocket that pushes a view
//!   after every applied move.

pub use shadowgame_client::api;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use shadowgame_core::geometry::Grid2D;
use shadowgame_core::strategies::GameWorld;
use tokio::sync::{broadcast, Mutex, RwLock};

use api::{ApiError, CreateSession, MoveLog, MoveRequest, SessionView};
use session::{Session, SessionError};

pub const MAX_GRID: usize = 256;
const CHANNEL_CAPACITY: usize = 16;

type WorldCache = HashMap<(String, usize), Arc<GameWorld>>;

struct Entry {
    session: Arc<Mutex<Session>>,
    updates: broadcast::Sender<SessionView>,
}

/// Shared service state: live sessions plus a cache of precomputed worlds.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Entry>>>>,
    worlds: Arc<Mutex<WorldCache>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    async fn world(&self, req: &CreateSession) -> Result<Arc<GameWorld>, SessionError> {
        if req.m > MAX_GRID {
            return Err(SessionError::BadRequest(format!("m must be at most {MAX_GRID}")));
        }
        let key = (req.scene.hash(), req.m);
        if let Some(w) = self.worlds.lock().await.get(&key) {
            return Ok(Arc::clone(w));
        }
        let scene = req.scene.clone();
        let m = req.m;
        let world = tokio::task::spawn_blocking(move || {
            let grid = Grid2D::new(m)?;
            GameWorld::new(scene, grid)
        })
        .await
        .map_err(|e| SessionError::Internal(e.to_string()))?
        .map_err(|e| SessionError::BadRequest(e.to_string()))?;
        let world = Arc::new(world);
        self.worlds.lock().await.insert(key, Arc::clone(&world));
        Ok(world)
    }

    async fn entry(&self, id: &str) -> Result<Arc<Entry>, SessionError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let code = match &self {
            SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Finished => StatusCode::CONFLICT,
            SessionError::IllegalMove(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (
            code,
            Json(ApiError {
                error: self.to_string(),
            }),
        )
            .into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/moves", post(submit_move))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), SessionError> {
    let world = state.world(&req).await?;
    let id = uuid::Uuid::new_v4().to_string();
    let (session, view) = tokio::task::spawn_blocking(move || {
        let s = Session::create(id, world, &req)?;
        let v = s.view()?;
        Ok::<_, SessionError>((s, v))
    })
    .await
    .map_err(|e| SessionError::Internal(e.to_string()))??;
    let (updates, _) = broadcast::channel(CHANNEL_CAPACITY);
    let entry = Arc::new(Entry {
        session: Arc::new(Mutex::new(session)),
        updates,
    });
    state.sessions.write().await.insert(view.id.clone(), entry);
    tracing::info!(id = %view.id, controller = %view.controller, "session created");
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, SessionError> {
    let entry = state.entry(&id).await?;
    let view = entry.session.lock().await.view()?;
    Ok(Json(view))
}

async fn get_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<MoveLog>, SessionError> {
    let entry = state.entry(&id).await?;
    let log = entry.session.lock().await.log().clone();
    Ok(Json(log))
}

async fn submit_move(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(mv): Json<MoveRequest>,
) -> Result<Json<SessionView>, SessionError> {
    let entry = state.entry(&id).await?;
    // holding the async lock across the blocking search serializes moves per session
    let mut guard = Arc::clone(&entry.session).lock_owned().await;
    let view = tokio::task::spawn_blocking(move || {
        guard.submit(&mv)?;
        guard.view()
    })
    .await
    .map_err(|e| SessionError::Internal(e.to_string()))??;
    let _ = entry.updates.send(view.clone());
    tracing::debug!(%id, turn = view.state.turn, status = ?view.status, "move applied");
    Ok(Json(view))
}

async fn stream(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, SessionError> {
    let entry = state.entry(&id).await?;
    Ok(ws.on_upgrade(move |socket| push_updates(socket, entry)))
}

async fn push_updates(mut socket: WebSocket, entry: Arc<Entry>) {
    let mut rx = entry.updates.subscribe();
    let first = entry.session.lock().await.view();
    let Ok(first) = first else { return };
    if send_view(&mut socket, &first).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            update = rx.recv() => match update {
                Ok(view) => {
                    if send_view(&mut socket, &view).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let Ok(view) = entry.session.lock().await.view() else { return };
                    if send_view(&mut socket, &view).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn send_view(socket: &mut WebSocket, view: &SessionView) -> Result<(), axum::Error> {
    let text = serde_json::to_string(view).expect("views serialize");
    socket.send(Message::Text(text.into())).await
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
