//! HTTP/JSON sessions in which a human plays a trained agent.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /games` | `{"variant", "humanMark"?, "agentStarts"?}` | 201 `{"id", "state"}` |
//! | `POST /games/{id}/moves` | `{"cell"}` | 200 `{"state", "agentActs", "status"}` |
//! | `GET /games/{id}` | | 200 `{"id", "state"}` |
//! | `GET /healthz` | | 200 `{"ok": true}` |
//!
//! Errors are `{"error": "..."}` with 400 (bad request), 404 (unknown or
//! expired session), 409 (not the human's turn, or another move for the
//! same session in flight) or 422 (illegal cell; the game is unchanged).
//! `status` is the agent's view: `ongoing`, `win`, `loss`, `draw` or
//! `abandoned`.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use noughts::drl::Policy;
use noughts::game::{CellId, MacroCell, Player, Variant};
use noughts::play::{Actor, HumanGame, PlayError, PlayStatus, TranscriptEntry};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

pub const DEFAULT_IDLE_EXPIRY: Duration = Duration::from_secs(30 * 60);

pub struct ServiceConfig {
    pub policies: HashMap<Variant, Arc<Policy>>,
    pub idle_expiry: Duration,
    /// Append-only JSON-lines log of every transcript entry.
    pub transcript_log: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(policies: impl IntoIterator<Item = Policy>) -> Self {
        ServiceConfig {
            policies: policies.into_iter().map(|p| (p.variant(), Arc::new(p))).collect(),
            idle_expiry: DEFAULT_IDLE_EXPIRY,
            transcript_log: None,
        }
    }
}

struct Session {
    game: HumanGame,
    last_used: Instant,
}

struct Inner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    log: Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState(Arc::new(Inner {
            config,
            sessions: Mutex::new(HashMap::new()),
            log: Mutex::new(()),
        }))
    }

    /// Drops sessions idle for longer than the expiry.
    pub async fn purge_expired(&self) {
        let expiry = self.0.config.idle_expiry;
        let entries: Vec<_> = self.sessions().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut dead = Vec::new();
        for (id, s) in entries {
            if let Ok(s) = s.try_lock() {
                if s.last_used.elapsed() > expiry {
                    dead.push(id);
                }
            }
        }
        let mut map = self.sessions();
        for id in dead {
            map.remove(&id);
        }
    }

    pub fn session_count(&self) -> usize {
        self.sessions().len()
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<tokio::sync::Mutex<Session>>>> {
        self.0.sessions.lock().expect("session table")
    }

    fn lookup(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<Session>>> {
        self.sessions().get(id).cloned()
    }

    fn append_log(&self, id: &str, entries: &[TranscriptEntry]) {
        let Some(path) = &self.0.config.transcript_log else {
            return;
        };
        let _guard = self.0.log.lock().expect("log lock");
        let Ok(mut f) = OpenOptions::new().create(true).append(true).open(path) else {
            return;
        };
        for e in entries {
            let line = json!({ "session": id, "entry": e });
            let _ = writeln!(f, "{line}");
        }
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn not_found() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "unknown or expired game".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateView {
    pub variant: Variant,
    /// Marks by display row, `"x"`, `"o"` or `""`.
    pub board: Vec<Vec<String>>,
    /// Cell names by display row.
    pub cell_names: Vec<Vec<String>>,
    pub active_subgrid: Option<usize>,
    /// Ultimate only: `"x"`, `"o"`, `"draw"` or `""` per subgrid.
    pub macro_board: Option<Vec<String>>,
    pub legal_moves: Vec<String>,
    pub human_mark: String,
    pub agent_mark: String,
    pub awaiting_human_move: bool,
    pub status: PlayStatus,
    pub transcript: Vec<TranscriptEntry>,
}

fn mark_name(p: Player) -> String {
    p.symbol().to_ascii_lowercase().to_string()
}

fn view(game: &HumanGame) -> StateView {
    let variant = game.variant();
    let g = game.state().game();
    let side = variant.side();
    let (mut board, mut names) = (Vec::with_capacity(side), Vec::with_capacity(side));
    for r in 0..side {
        let cells: Vec<CellId> = (0..side)
            .map(|c| CellId::from_board_position(variant, r, c).expect("in range"))
            .collect();
        board.push(
            cells
                .iter()
                .map(|&c| g.cell(c).player().map(mark_name).unwrap_or_default())
                .collect(),
        );
        names.push(cells.iter().map(|c| c.name(variant)).collect());
    }
    let macro_board = (variant == Variant::Ultimate).then(|| {
        g.macro_board()
            .iter()
            .map(|m| match m {
                MacroCell::Won(p) => mark_name(*p),
                MacroCell::Draw => "draw".into(),
                MacroCell::Open => String::new(),
            })
            .collect()
    });
    StateView {
        variant,
        board,
        cell_names: names,
        active_subgrid: if game.awaiting_human_move() { g.active_subgrid() } else { None },
        macro_board,
        legal_moves: game.legal_moves().iter().map(|c| c.name(variant)).collect(),
        human_mark: mark_name(game.human()),
        agent_mark: mark_name(game.human().opponent()),
        awaiting_human_move: game.awaiting_human_move(),
        status: game.status(),
        transcript: game.transcript().to_vec(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreateGame {
    pub variant: String,
    #[serde(default)]
    pub human_mark: Option<String>,
    #[serde(default)]
    pub agent_starts: Option<bool>,
}

#[derive(Debug, Deserialize)]
pub struct MoveRequest {
    pub cell: String,
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "ok": true }))
}

async fn create_game(State(app): State<AppState>, Json(req): Json<CreateGame>) -> Result<Response, ApiError> {
    let bad = |m: String| ApiError(StatusCode::BAD_REQUEST, m);
    let variant: Variant = req.variant.parse().map_err(|_| bad(format!("unknown variant {:?}", req.variant)))?;
    let human = match req.human_mark.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None | Some("o") => Player::Nought,
        Some("x") => Player::Cross,
        Some(m) => return Err(bad(format!("humanMark must be \"x\" or \"o\", not {m:?}"))),
    };
    let policy = app
        .0
        .config
        .policies
        .get(&variant)
        .cloned()
        .ok_or_else(|| bad(format!("no agent loaded for the {variant} variant")))?;
    let agent_starts = req.agent_starts.unwrap_or(true);
    let game = tokio::task::spawn_blocking(move || HumanGame::new(policy, human, agent_starts))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let state = view(&game);
    app.append_log(&id, game.transcript());
    let session = Session {
        game,
        last_used: Instant::now(),
    };
    app.sessions().insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "state": state }))).into_response())
}

async fn get_game(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let session = app.lookup(&id).ok_or_else(not_found)?;
    let mut s = session.lock().await;
    if s.last_used.elapsed() > app.0.config.idle_expiry {
        drop(s);
        app.sessions().remove(&id);
        return Err(not_found());
    }
    s.last_used = Instant::now();
    Ok(Json(json!({ "id": id, "state": view(&s.game) })))
}

async fn post_move(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<MoveRequest>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let session = app.lookup(&id).ok_or_else(not_found)?;
    let mut guard = session
        .try_lock_owned()
        .map_err(|_| ApiError(StatusCode::CONFLICT, "another move for this game is in progress".into()))?;
    if guard.last_used.elapsed() > app.0.config.idle_expiry {
        drop(guard);
        app.sessions().remove(&id);
        return Err(not_found());
    }
    if !guard.game.awaiting_human_move() {
        let e = if guard.game.state().is_terminal() { PlayError::Over } else { PlayError::NotYourTurn };
        return Err(ApiError(StatusCode::CONFLICT, e.to_string()));
    }
    let variant = guard.game.variant();
    let cell = CellId::parse(variant, &req.cell)
        .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let (guard, result) = tokio::task::spawn_blocking(move || {
        let r = guard.game.human_move(cell);
        (guard, r)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let mut guard = guard;
    guard.last_used = Instant::now();
    let added = result.map_err(|e| match e {
        PlayError::Illegal(_) => ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        PlayError::NotYourTurn | PlayError::Over => ApiError(StatusCode::CONFLICT, e.to_string()),
        other => ApiError(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    })?;
    app.append_log(&id, &added);
    let agent_acts: Vec<&TranscriptEntry> = added.iter().filter(|e| e.actor == Actor::Agent).collect();
    let state = view(&guard.game);
    Ok(Json(json!({ "state": state, "agentActs": agent_acts, "status": state.status })))
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/games", post(create_game))
        .route("/games/{id}", get(get_game))
        .route("/games/{id}/moves", post(post_move))
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// Serves on `addr` until interrupted, purging idle sessions every minute.
pub async fn serve(config: ServiceConfig, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let app = AppState::new(config);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let sweeper = app.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.purge_expired().await;
        }
    });
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
