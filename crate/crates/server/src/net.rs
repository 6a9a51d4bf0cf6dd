//! HTTP and WebSocket front end. Each room runs as one task that owns its
//! [`RoomCore`]; connections talk to it over a channel, so a room applies
//! events strictly one at a time while I/O stays concurrent.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use miboard_core::protocol::{ClientCommand, ClientFrame, Frame, ServerEvent, ServerFrame};
use miboard_core::{GameConfig, Seat};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::time::Instant;

use crate::corpora::Corpora;
use crate::log::read_log;
use crate::room::{tokens_path, Delivery, RoomCore, RoomError, RoomOptions, SeatToken};

const ROOM_ID_ALPHABET: &[u8] = b"23456789ABCDEFGHJKMNPQRSTUVWXYZ";
const ROOM_ID_LEN: usize = 6;

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn new_room_id() -> String {
    let mut rng = rand::rng();
    (0..ROOM_ID_LEN)
        .map(|_| ROOM_ID_ALPHABET[rng.random_range(0..ROOM_ID_ALPHABET.len())] as char)
        .collect()
}

fn new_token() -> String {
    format!("{:032x}", rand::rng().random::<u128>())
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub corpora: Corpora,
    pub time_scale: f64,
}

#[derive(Debug, Clone)]
struct Conn {
    id: u64,
    tx: mpsc::UnboundedSender<String>,
}

enum RoomMsg {
    Join {
        name: String,
        conn: Conn,
        after_seq: u64,
        reply: oneshot::Sender<Result<Seat, RoomError>>,
    },
    Attach {
        token: String,
        conn: Conn,
        after_seq: u64,
        reply: oneshot::Sender<Option<Seat>>,
    },
    Frame {
        seat: Seat,
        conn_id: u64,
        frame: ClientFrame,
    },
    Reject {
        seat: Seat,
        event: ServerEvent,
    },
    Closed {
        seat: Seat,
        conn_id: u64,
    },
    Log {
        reply: oneshot::Sender<Option<String>>,
    },
}

#[derive(Clone)]
struct RoomHandle {
    tx: mpsc::UnboundedSender<RoomMsg>,
}

pub struct AppState {
    config: ServerConfig,
    rooms: Mutex<HashMap<String, RoomHandle>>,
    next_conn: AtomicU64,
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateRoomBody {
    #[serde(default)]
    pub config: Option<GameConfig>,
    #[serde(default)]
    pub corpus_id: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: String,
    detail: String,
}

impl AppState {
    /// Creates the state and resumes every unfinished game found in the
    /// data directory.
    pub fn start(config: ServerConfig) -> std::io::Result<Arc<Self>> {
        std::fs::create_dir_all(&config.data_dir)?;
        let state = Arc::new(AppState {
            config,
            rooms: Mutex::new(HashMap::new()),
            next_conn: AtomicU64::new(1),
        });
        state.recover_rooms()?;
        Ok(state)
    }

    fn recover_rooms(&self) -> std::io::Result<()> {
        for entry in std::fs::read_dir(&self.config.data_dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            match self.recover_room(&path) {
                Ok(id) => tracing::info!(room = %id, "recovered room"),
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "could not recover room"),
            }
        }
        Ok(())
    }

    fn recover_room(&self, path: &Path) -> Result<String, String> {
        let log = read_log(path).map_err(|e| e.to_string())?;
        let corpus = self
            .config
            .corpora
            .by_checksum(&log.header.corpus_checksum)
            .ok_or_else(|| format!("no corpus with checksum {}", log.header.corpus_checksum))?;
        let tokens: Vec<SeatToken> = std::fs::read(tokens_path(path))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or_default();
        let options = RoomOptions {
            log_path: Some(path.to_path_buf()),
            time_scale: self.config.time_scale,
        };
        let (core, _) =
            RoomCore::recover(log, tokens, corpus, options, now_ms()).map_err(|e| e.to_string())?;
        let id = core.room_id().to_string();
        self.spawn_room(core);
        Ok(id)
    }

    pub fn create_room(&self, body: CreateRoomBody) -> Result<String, RoomError> {
        let corpora = &self.config.corpora;
        let corpus = match &body.corpus_id {
            Some(id) => corpora
                .get(id)
                .ok_or_else(|| RoomError::UnknownCorpus(id.clone()))?,
            None => corpora.default_corpus(),
        };
        let room_id = {
            let rooms = self.rooms.lock().expect("room table");
            loop {
                let id = new_room_id();
                let taken = rooms.contains_key(&id) || self.log_path(&id).exists();
                if !taken {
                    break id;
                }
            }
        };
        let seed = body.seed.unwrap_or_else(|| rand::rng().random());
        let options = RoomOptions {
            log_path: Some(self.log_path(&room_id)),
            time_scale: self.config.time_scale,
        };
        let core = RoomCore::new(
            room_id.clone(),
            body.config.unwrap_or_default(),
            corpus,
            seed,
            options,
        )?;
        self.spawn_room(core);
        Ok(room_id)
    }

    fn log_path(&self, room_id: &str) -> PathBuf {
        self.config.data_dir.join(format!("{room_id}.jsonl"))
    }

    fn spawn_room(&self, core: RoomCore) {
        let (tx, rx) = mpsc::unbounded_channel();
        self.rooms
            .lock()
            .expect("room table")
            .insert(core.room_id().to_string(), RoomHandle { tx });
        tokio::spawn(run_room(core, rx));
    }

    fn room(&self, id: &str) -> Option<RoomHandle> {
        self.rooms.lock().expect("room table").get(id).cloned()
    }

    pub fn room_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.rooms.lock().expect("room table").keys().cloned().collect();
        ids.sort();
        ids
    }
}

fn deliver(conns: &[Option<Conn>], deliveries: Vec<Delivery>) {
    for d in deliveries {
        if let Some(Some(conn)) = conns.get(d.seat.index()) {
            let _ = conn.tx.send(d.frame.encode());
        }
    }
}

async fn run_room(mut core: RoomCore, mut rx: mpsc::UnboundedReceiver<RoomMsg>) {
    let mut conns: Vec<Option<Conn>> = vec![None; core.seat_count()];
    loop {
        let wake = core.next_deadline().map(|at| {
            Instant::now() + Duration::from_millis(at.saturating_sub(now_ms()))
        });
        let timer = async {
            match wake {
                Some(at) => tokio::time::sleep_until(at).await,
                None => std::future::pending().await,
            }
        };
        tokio::select! {
            msg = rx.recv() => {
                let Some(msg) = msg else { break };
                handle_room_msg(&mut core, &mut conns, msg);
            }
            () = timer => {
                let out = core.expire_due(now_ms());
                deliver(&conns, out);
            }
        }
    }
}

fn handle_room_msg(core: &mut RoomCore, conns: &mut Vec<Option<Conn>>, msg: RoomMsg) {
    match msg {
        RoomMsg::Join {
            name,
            conn,
            after_seq,
            reply,
        } => match core.join(&name, &new_token(), after_seq) {
            Ok((seat, out)) => {
                conns.resize(core.seat_count(), None);
                conns[seat.index()] = Some(conn);
                let _ = reply.send(Ok(seat));
                deliver(conns, out);
            }
            Err(e) => {
                let _ = reply.send(Err(e));
            }
        },
        RoomMsg::Attach {
            token,
            conn,
            after_seq,
            reply,
        } => match core.seat_for_token(&token) {
            Some(seat) => {
                conns.resize(core.seat_count(), None);
                conns[seat.index()] = Some(conn);
                let _ = reply.send(Some(seat));
                core.bump_seq(seat, after_seq);
                let out = core.attach(seat, now_ms());
                deliver(conns, out);
            }
            None => {
                let _ = reply.send(None);
            }
        },
        RoomMsg::Frame {
            seat,
            conn_id,
            frame,
        } => {
            if !owns(conns, seat, conn_id) {
                return;
            }
            let leaving_lobby = matches!(frame.command, ClientCommand::Leave) && !core.started();
            let out = core.command(seat, &frame, now_ms());
            if leaving_lobby && core.seat_count() < conns.len() {
                conns.remove(seat.index());
            }
            deliver(conns, out);
        }
        RoomMsg::Reject { seat, event } => {
            let out = core.reject(seat, event);
            deliver(conns, out);
        }
        RoomMsg::Closed { seat, conn_id } => {
            if owns(conns, seat, conn_id) {
                conns[seat.index()] = None;
                let out = core.set_connected(seat, false, now_ms());
                deliver(conns, out);
            }
        }
        RoomMsg::Log { reply } => {
            let _ = reply.send(core.log().map(|l| l.to_jsonl()));
        }
    }
}

fn owns(conns: &[Option<Conn>], seat: Seat, conn_id: u64) -> bool {
    conns
        .get(seat.index())
        .and_then(Option::as_ref)
        .is_some_and(|c| c.id == conn_id)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/rooms", post(create_room))
        .route("/rooms/{id}/log", get(room_log))
        .route("/ws", get(ws_upgrade))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn create_room(State(app): State<Arc<AppState>>, body: Option<Json<CreateRoomBody>>) -> Response {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    match app.create_room(body) {
        Ok(room_id) => Json(serde_json::json!({ "room_id": room_id })).into_response(),
        Err(e) => (
            StatusCode::BAD_REQUEST,
            Json(ErrorBody {
                code: e.code().to_string(),
                detail: e.to_string(),
            }),
        )
            .into_response(),
    }
}

async fn room_log(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(room) = app.room(&id) else {
        return (StatusCode::NOT_FOUND, "unknown room").into_response();
    };
    let (reply, rx) = oneshot::channel();
    if room.tx.send(RoomMsg::Log { reply }).is_err() {
        return (StatusCode::NOT_FOUND, "unknown room").into_response();
    }
    match rx.await {
        Ok(Some(text)) => ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response(),
        _ => (StatusCode::NOT_FOUND, "game not started").into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct WsQuery {
    room: Option<String>,
    token: Option<String>,
}

async fn ws_upgrade(
    ws: WebSocketUpgrade,
    Query(q): Query<WsQuery>,
    State(app): State<Arc<AppState>>,
) -> Response {
    ws.on_upgrade(move |socket| connection(socket, app, q))
}

/// Frames sent before the connection holds a seat are numbered locally.
struct Local {
    tx: mpsc::UnboundedSender<String>,
    seq: u64,
}

impl Local {
    fn send(&mut self, event: ServerEvent) {
        self.seq += 1;
        let _ = self.tx.send(ServerFrame { seq: self.seq, event }.encode());
    }

    fn error(&mut self, code: &str, detail: impl Into<String>) {
        self.send(ServerEvent::Error {
            code: code.to_string(),
            detail: detail.into(),
        });
    }
}

async fn connection(socket: WebSocket, app: Arc<AppState>, q: WsQuery) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let conn_id = app.next_conn.fetch_add(1, Ordering::Relaxed);
    let mut local = Local { tx, seq: 0 };
    let mut seated: Option<(RoomHandle, Seat)> = None;

    if let (Some(room_id), Some(token)) = (&q.room, &q.token) {
        match attach(&app, room_id, token, conn_id, &local).await {
            Some(s) => seated = Some(s),
            None => {
                local.error("BadToken", "unknown room or token");
                drop(local);
                let _ = writer.await;
                return;
            }
        }
    }

    while let Some(Ok(msg)) = stream.next().await {
        let bytes = match &msg {
            Message::Text(t) => t.as_bytes(),
            Message::Binary(b) => b.as_ref(),
            Message::Close(_) => break,
            _ => continue,
        };
        let decoded = ClientFrame::decode(bytes);
        match (&seated, decoded) {
            (Some((room, seat)), Ok(frame)) => {
                let leave = matches!(frame.command, ClientCommand::Leave);
                let _ = room.tx.send(RoomMsg::Frame {
                    seat: *seat,
                    conn_id,
                    frame,
                });
                if leave {
                    break;
                }
            }
            (Some((room, seat)), Err(e)) => {
                let _ = room.tx.send(RoomMsg::Reject {
                    seat: *seat,
                    event: ServerEvent::Error {
                        code: e.code().to_string(),
                        detail: e.to_string(),
                    },
                });
            }
            (None, Err(e)) => local.error(e.code(), e.to_string()),
            (None, Ok(frame)) => match frame.command {
                ClientCommand::CreateRoom {
                    config,
                    corpus_id,
                    seed,
                } => match app.create_room(CreateRoomBody {
                    config,
                    corpus_id,
                    seed,
                }) {
                    Ok(room_id) => local.send(ServerEvent::RoomCreated { room_id }),
                    Err(e) => local.send(e.to_event()),
                },
                ClientCommand::JoinRoom {
                    room_id,
                    display_name,
                } => match join(&app, &room_id, display_name, conn_id, &local).await {
                    Ok(s) => seated = Some(s),
                    Err(e) => local.send(e.to_event()),
                },
                _ => local.error("NotSeated", "join a room first"),
            },
        }
    }

    if let Some((room, seat)) = seated {
        let _ = room.tx.send(RoomMsg::Closed { seat, conn_id });
    }
    drop(local);
    writer.abort();
}

async fn join(
    app: &AppState,
    room_id: &str,
    name: String,
    conn_id: u64,
    local: &Local,
) -> Result<(RoomHandle, Seat), RoomError> {
    let room = app
        .room(room_id)
        .ok_or_else(|| RoomError::UnknownRoom(room_id.to_string()))?;
    let (reply, rx) = oneshot::channel();
    let conn = Conn {
        id: conn_id,
        tx: local.tx.clone(),
    };
    let msg = RoomMsg::Join {
        name,
        conn,
        after_seq: local.seq,
        reply,
    };
    let gone = || RoomError::UnknownRoom(room_id.to_string());
    room.tx.send(msg).map_err(|_| gone())?;
    let seat = rx.await.map_err(|_| gone())??;
    Ok((room, seat))
}

async fn attach(
    app: &AppState,
    room_id: &str,
    token: &str,
    conn_id: u64,
    local: &Local,
) -> Option<(RoomHandle, Seat)> {
    let room = app.room(room_id)?;
    let (reply, rx) = oneshot::channel();
    let conn = Conn {
        id: conn_id,
        tx: local.tx.clone(),
    };
    room.tx
        .send(RoomMsg::Attach {
            token: token.to_string(),
            conn,
            after_seq: local.seq,
            reply,
        })
        .ok()?;
    let seat = rx.await.ok()??;
    Some((room, seat))
}

/// Binds `addr` and serves in the background, returning the bound address.
pub async fn spawn(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = serve(listener, state).await {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok(local)
}
