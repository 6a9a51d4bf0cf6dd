//! Bots playing against a live server over WebSockets.
//!
//! The harness runs every bot from one task in lock step: after each
//! command it waits for the ack, then for every other seat to receive the
//! frames the ack's horizon promises. Decisions therefore see exactly what
//! they would in [`crate::sim`], and a game's log is the same on both paths.

use std::net::SocketAddr;
use std::time::Duration;

use futures::stream::SplitSink;
use futures::{SinkExt, StreamExt};
use miboard_core::protocol::{ClientCommand, ClientFrame, Frame, ServerEvent, ServerFrame};
use miboard_core::{GameConfig, Seat};
use miboard_server::net::now_ms;
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::time::{sleep, timeout_at, Instant};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use crate::policy::{Bot, BotPolicy, Decision};
use crate::sim::{bot_name, command_tag, Rejection};
use crate::view::ClientView;

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

#[derive(Debug, thiserror::Error)]
pub enum SocketError {
    #[error("a game needs 3 or 4 bots, got {0}")]
    PlayerCount(usize),
    #[error("could not connect: {0}")]
    Connect(String),
    #[error("server refused: {code}")]
    Refused { code: String },
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
}

#[derive(Debug, Clone)]
pub struct SocketOptions {
    pub config: Option<GameConfig>,
    pub corpus_id: Option<String>,
    pub seed: Option<u64>,
    /// How long a dropped seat keeps trying to reattach.
    pub reconnect_within: Duration,
    /// Longest wait for any frame while nobody can act.
    pub idle_timeout: Duration,
}

impl Default for SocketOptions {
    fn default() -> Self {
        SocketOptions {
            config: None,
            corpus_id: None,
            seed: None,
            reconnect_within: Duration::from_secs(15),
            idle_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SocketRun {
    pub room_id: String,
    pub frames: Vec<Vec<ServerFrame>>,
    pub views: Vec<ClientView>,
    pub rejections: Vec<Rejection>,
    pub reconnects: usize,
    pub actions: usize,
}

enum Incoming {
    Frame(usize, u64, ServerFrame),
    Closed(usize, u64),
}

struct Link {
    sink: Option<SplitSink<Ws, Message>>,
    generation: u64,
    /// Received a welcome or snapshot on the current connection.
    synced: bool,
}

impl Link {
    fn alive(&self) -> bool {
        self.sink.is_some()
    }
}

struct Harness {
    addr: SocketAddr,
    opts: SocketOptions,
    bots: Vec<Bot>,
    links: Vec<Link>,
    tx: mpsc::UnboundedSender<Incoming>,
    rx: mpsc::UnboundedReceiver<Incoming>,
    frames: Vec<Vec<ServerFrame>>,
    rejections: Vec<Rejection>,
    reconnects: usize,
}

impl Harness {
    async fn open(&mut self, seat: usize, query: &str) -> Result<(), SocketError> {
        let url = format!("ws://{}/ws{query}", self.addr);
        let (ws, _) = connect_async(url)
            .await
            .map_err(|e| SocketError::Connect(e.to_string()))?;
        let (sink, mut stream) = ws.split();
        let link = &mut self.links[seat];
        link.generation += 1;
        link.synced = false;
        link.sink = Some(sink);
        let generation = link.generation;
        let tx = self.tx.clone();
        tokio::spawn(async move {
            while let Some(Ok(msg)) = stream.next().await {
                if let Message::Text(text) = msg {
                    if let Ok(frame) = ServerFrame::decode(text.as_bytes()) {
                        let _ = tx.send(Incoming::Frame(seat, generation, frame));
                    }
                }
            }
            let _ = tx.send(Incoming::Closed(seat, generation));
        });
        Ok(())
    }

    async fn send(&mut self, seat: usize, frame: ClientFrame) {
        let Some(sink) = self.links[seat].sink.as_mut() else {
            return;
        };
        if sink.send(Message::Text(frame.encode().into())).await.is_err() {
            self.drop_link(seat);
        }
    }

    fn drop_link(&mut self, seat: usize) {
        self.links[seat].sink = None;
        self.bots[seat].view.awaiting_ack = None;
    }

    /// Handles one incoming message, or returns false at `until`.
    async fn pump(&mut self, until: Instant) -> bool {
        let Ok(Some(msg)) = timeout_at(until, self.rx.recv()).await else {
            return false;
        };
        match msg {
            Incoming::Frame(seat, generation, frame) => {
                if generation != self.links[seat].generation {
                    return true;
                }
                if matches!(frame.event, ServerEvent::RoomState { .. } | ServerEvent::Welcome { .. }) {
                    self.links[seat].synced = true;
                }
                self.bots[seat].view.apply(&frame, now_ms());
                self.frames[seat].push(frame);
            }
            Incoming::Closed(seat, generation) => {
                if generation == self.links[seat].generation {
                    self.drop_link(seat);
                }
            }
        }
        true
    }

    async fn pump_until(
        &mut self,
        what: &'static str,
        timeout: Duration,
        done: impl Fn(&Harness) -> bool,
    ) -> Result<(), SocketError> {
        let until = Instant::now() + timeout;
        while !done(self) {
            if !self.pump(until).await {
                return Err(SocketError::Timeout(what));
            }
        }
        Ok(())
    }

    /// Reattaches every dropped seat with its token.
    async fn ensure_links(&mut self) -> Result<(), SocketError> {
        for seat in 0..self.links.len() {
            if self.links[seat].alive() && self.links[seat].synced {
                continue;
            }
            let view = &self.bots[seat].view;
            let (Some(room), Some(token)) = (view.room_id.clone(), view.token.clone()) else {
                return Err(SocketError::Connect(format!("seat {seat} has no token")));
            };
            let give_up = Instant::now() + self.opts.reconnect_within;
            loop {
                if Instant::now() > give_up {
                    return Err(SocketError::Timeout("reconnect"));
                }
                if !self.links[seat].alive() {
                    if self.open(seat, &format!("?room={room}&token={token}")).await.is_err() {
                        sleep(Duration::from_millis(50)).await;
                        continue;
                    }
                    self.reconnects += 1;
                }
                let generation = self.links[seat].generation;
                let until = (Instant::now() + Duration::from_secs(2)).min(give_up);
                while self.links[seat].generation == generation
                    && self.links[seat].alive()
                    && !self.links[seat].synced
                {
                    if !self.pump(until).await {
                        break;
                    }
                }
                if self.links[seat].alive() && self.links[seat].synced {
                    break;
                }
                self.drop_link(seat);
                sleep(Duration::from_millis(50)).await;
            }
        }
        Ok(())
    }

    /// Sends one policy command and waits until every seat is caught up.
    async fn act(&mut self, seat: usize, command: ClientCommand) -> Result<(), SocketError> {
        let tag = command_tag(&command);
        let frame = self.bots[seat].frame(command);
        let cmd_seq = frame.seq;
        let generations: Vec<u64> = self.links.iter().map(|l| l.generation).collect();
        let seen_before = self.frames[seat].len();
        self.send(seat, frame).await;
        let wait = self.opts.idle_timeout;
        self.pump_until("ack", wait, |h| h.bots[seat].view.awaiting_ack.is_none()).await?;
        let Some((acked, _, horizon)) = self.bots[seat].view.last_ack.clone() else {
            return Ok(());
        };
        if acked != cmd_seq || !self.links[seat].alive() {
            return Ok(());
        }
        for f in &self.frames[seat][seen_before..] {
            if let ServerEvent::Error { code, .. } | ServerEvent::ChatRejected { reason: code, .. } = &f.event {
                self.rejections.push(Rejection {
                    seat: Seat(seat as u8),
                    command: tag.to_string(),
                    code: code.clone(),
                });
            }
        }
        self.pump_until("horizon", wait, |h| {
            horizon.iter().enumerate().all(|(s, &seq)| {
                s >= h.links.len()
                    || h.links[s].generation != generations[s]
                    || !h.links[s].alive()
                    || h.bots[s].view.last_seq >= seq
            })
        })
        .await
    }
}

/// Plays one game against the server at `addr`. Bot 0 creates the room;
/// `after_action` runs after every acknowledged command with the running
/// count, which lets a test interfere with the server mid-game.
pub async fn play_over_socket(
    addr: SocketAddr,
    policies: &[BotPolicy],
    opts: SocketOptions,
    mut after_action: impl FnMut(usize),
) -> Result<SocketRun, SocketError> {
    if !(3..=4).contains(&policies.len()) {
        return Err(SocketError::PlayerCount(policies.len()));
    }
    let (tx, rx) = mpsc::unbounded_channel();
    let n = policies.len();
    let mut h = Harness {
        addr,
        bots: policies.iter().enumerate().map(|(i, p)| Bot::new(*p, bot_name(i))).collect(),
        links: (0..n)
            .map(|_| Link {
                sink: None,
                generation: 0,
                synced: false,
            })
            .collect(),
        tx,
        rx,
        frames: vec![Vec::new(); n],
        rejections: Vec::new(),
        reconnects: 0,
        opts,
    };
    let wait = h.opts.idle_timeout;

    h.open(0, "").await?;
    let create = ClientCommand::CreateRoom {
        config: h.opts.config.clone(),
        corpus_id: h.opts.corpus_id.clone(),
        seed: h.opts.seed,
    };
    h.send(0, ClientFrame { seq: 0, command: create }).await;
    h.pump_until("room", wait, |h| {
        h.bots[0].view.room_id.is_some() || !h.bots[0].view.rejections.is_empty()
    })
    .await?;
    let Some(room_id) = h.bots[0].view.room_id.clone() else {
        return Err(SocketError::Refused {
            code: h.bots[0].view.rejections[0].clone(),
        });
    };

    for seat in 0..n {
        if seat > 0 {
            h.open(seat, "").await?;
        }
        let join = ClientCommand::JoinRoom {
            room_id: room_id.clone(),
            display_name: bot_name(seat),
        };
        h.send(seat, ClientFrame { seq: 0, command: join }).await;
        h.pump_until("seat", wait, |h| {
            h.bots[seat].view.seat.is_some() || !h.bots[seat].view.rejections.is_empty()
        })
        .await?;
        if h.bots[seat].view.seat.is_none() {
            return Err(SocketError::Refused {
                code: h.bots[seat].view.rejections[0].clone(),
            });
        }
        h.pump_until("lobby", wait, |h| {
            (0..=seat).all(|s| h.bots[s].view.lobby.len() == seat + 1)
        })
        .await?;
    }

    let mut actions = 0;
    let mut idle_since = Instant::now();
    'game: loop {
        if h.bots.iter().all(|b| b.view.is_over()) {
            break;
        }
        h.ensure_links().await?;
        let now = now_ms();
        let mut wake: Option<u64> = None;
        for seat in 0..n {
            match h.bots[seat].decide(now) {
                Decision::Act(command) => {
                    h.act(seat, command).await?;
                    actions += 1;
                    after_action(actions);
                    idle_since = Instant::now();
                    continue 'game;
                }
                Decision::WaitUntil(t) => wake = Some(wake.map_or(t, |w| w.min(t))),
                Decision::Idle => {}
            }
        }
        let mut until = Instant::now() + Duration::from_millis(250);
        if let Some(t) = wake {
            until = until.min(Instant::now() + Duration::from_millis(t.saturating_sub(now)));
        }
        if h.pump(until).await {
            idle_since = Instant::now();
        } else if idle_since.elapsed() > wait {
            return Err(SocketError::Timeout("game progress"));
        }
    }

    for link in &mut h.links {
        if let Some(mut sink) = link.sink.take() {
            let _ = sink.close().await;
        }
    }
    Ok(SocketRun {
        room_id,
        frames: h.frames,
        views: h.bots.into_iter().map(|b| b.view).collect(),
        rejections: h.rejections,
        reconnects: h.reconnects,
        actions,
    })
}
