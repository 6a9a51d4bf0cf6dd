//! One room, without any I/O besides its log file: a lobby, then a game
//! driven through the reducer with write-ahead logging, server-side
//! timers and per-seat framed deliveries.
//!
//! Callers pass the current time in milliseconds with every call. The
//! socket server passes the wall clock; simulations pass a virtual clock.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use miboard_core::canonical::canonical_hash;
use miboard_core::protocol::messages::LobbyPlayer;
use miboard_core::protocol::{
    validate_for_phase, ClientCommand, ClientFrame, RoomSnapshot, ServerEvent, ServerFrame,
};
use miboard_core::{
    Action, Effect, GameConfig, GameEvent, GameState, RuleError, Seat, SetupError, TextCorpus,
    TimerKind, TurnPhase,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log::{EventLog, LogHeader, LogRecord, ParsedLog, LOG_VERSION};
use crate::replay::{replay, ReplayError};

pub const MAX_SEATS: usize = 4;
pub const MIN_SEATS: usize = 3;

#[derive(Debug, Error)]
pub enum RoomError {
    #[error("room is full")]
    RoomFull,
    #[error("display name `{0}` is taken")]
    NameTaken(String),
    #[error("display name must not be empty")]
    EmptyName,
    #[error("the game has already started")]
    GameInProgress,
    #[error("the game has not started")]
    NotStarted,
    #[error("this connection already holds a seat")]
    AlreadySeated,
    #[error("no room `{0}`")]
    UnknownRoom(String),
    #[error("no corpus `{0}`")]
    UnknownCorpus(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("log write failed: {0}")]
    Io(#[from] io::Error),
}

impl RoomError {
    pub fn code(&self) -> &'static str {
        match self {
            RoomError::RoomFull => "RoomFull",
            RoomError::NameTaken(_) => "NameTaken",
            RoomError::EmptyName => "EmptyName",
            RoomError::GameInProgress => "GameInProgress",
            RoomError::NotStarted => "NotStarted",
            RoomError::AlreadySeated => "AlreadySeated",
            RoomError::UnknownRoom(_) => "UnknownRoom",
            RoomError::UnknownCorpus(_) => "UnknownCorpus",
            RoomError::Rule(e) => e.code(),
            RoomError::Setup(_) => "BadConfig",
            RoomError::Replay(e) => e.code(),
            RoomError::Io(_) => "LogWriteFailed",
        }
    }

    pub fn to_event(&self) -> ServerEvent {
        ServerEvent::Error {
            code: self.code().to_string(),
            detail: self.to_string(),
        }
    }
}

/// A framed event addressed to one seat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub seat: Seat,
    pub frame: ServerFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deadline {
    pub at_ms: u64,
    pub round: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeatToken {
    pub name: String,
    pub token: String,
}

#[derive(Debug, Clone)]
struct Member {
    name: String,
    token: String,
    ready: bool,
    connected: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RoomOptions {
    /// Where the event log is written; `None` keeps it in memory only.
    pub log_path: Option<PathBuf>,
    /// Timer durations are divided by this factor. Zero or negative means 1.
    pub time_scale: f64,
}

impl RoomOptions {
    pub fn in_memory() -> Self {
        RoomOptions {
            log_path: None,
            time_scale: 1.0,
        }
    }

    fn scale(&self) -> f64 {
        if self.time_scale > 0.0 {
            self.time_scale
        } else {
            1.0
        }
    }
}

/// The sidecar file holding join tokens next to a log.
pub fn tokens_path(log_path: &Path) -> PathBuf {
    log_path.with_extension("seats.json")
}

fn timer_for(phase: TurnPhase) -> Option<TimerKind> {
    match phase {
        TurnPhase::SelfExplaining => Some(TimerKind::SelfExplain),
        TurnPhase::Voting => Some(TimerKind::Vote),
        TurnPhase::Debating => Some(TimerKind::Debate),
        TurnPhase::Revoting => Some(TimerKind::Revote),
        _ => None,
    }
}

fn timer_seconds(config: &GameConfig, timer: TimerKind) -> u32 {
    match timer {
        TimerKind::SelfExplain => config.self_explain_seconds,
        TimerKind::Vote | TimerKind::Revote => config.vote_seconds,
        TimerKind::Debate => config.debate_seconds,
    }
}

#[derive(Debug)]
pub struct RoomCore {
    room_id: String,
    config: GameConfig,
    corpus: Arc<TextCorpus>,
    seed: u64,
    options: RoomOptions,
    members: Vec<Member>,
    game: Option<GameState>,
    log: Option<EventLog>,
    timers: BTreeMap<TimerKind, Deadline>,
    out_seq: Vec<u64>,
}

impl RoomCore {
    pub fn new(
        room_id: impl Into<String>,
        config: GameConfig,
        corpus: Arc<TextCorpus>,
        seed: u64,
        options: RoomOptions,
    ) -> Result<Self, RoomError> {
        config.validate()?;
        if corpus.target_count() == 0 {
            return Err(SetupError::EmptyCorpus.into());
        }
        Ok(RoomCore {
            room_id: room_id.into(),
            config,
            corpus,
            seed,
            options,
            members: Vec::new(),
            game: None,
            log: None,
            timers: BTreeMap::new(),
            out_seq: Vec::new(),
        })
    }

    /// Rebuilds a room from its log after a restart. Every seat comes back
    /// disconnected (logged), the current phase's timer restarts at its
    /// full length, and any host step interrupted by the crash is taken.
    pub fn recover(
        log: ParsedLog,
        tokens: Vec<SeatToken>,
        corpus: Arc<TextCorpus>,
        options: RoomOptions,
        now_ms: u64,
    ) -> Result<(Self, Vec<Delivery>), RoomError> {
        let game = replay(&log, corpus.clone())?;
        let header = log.header.clone();
        let mut members: Vec<Member> = header
            .player_ids
            .iter()
            .map(|name| Member {
                name: name.clone(),
                token: String::new(),
                ready: true,
                connected: false,
            })
            .collect();
        for (member, t) in members.iter_mut().zip(tokens) {
            member.token = t.token;
        }
        let event_log = EventLog::resume(log, options.log_path.as_deref())?;
        let n = members.len();
        let mut room = RoomCore {
            room_id: header.room_id,
            config: header.config,
            corpus,
            seed: header.seed,
            options,
            members,
            game: Some(game),
            log: Some(event_log),
            timers: BTreeMap::new(),
            out_seq: vec![0; n],
        };
        let mut out = Vec::new();
        if !room.is_finished() {
            for seat in (0..n as u8).map(Seat) {
                let connected = room.game().and_then(|g| g.player(seat)).is_some_and(|p| p.connected);
                if connected {
                    room.apply(
                        GameEvent::system(Action::SetConnected {
                            seat,
                            connected: false,
                        }),
                        now_ms,
                        &mut out,
                    )?;
                }
            }
            room.settle(now_ms, &mut out)?;
            room.rearm_phase_timer(now_ms);
        }
        Ok((room, out))
    }

    pub fn room_id(&self) -> &str {
        &self.room_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn corpus(&self) -> &Arc<TextCorpus> {
        &self.corpus
    }

    pub fn game(&self) -> Option<&GameState> {
        self.game.as_ref()
    }

    pub fn log(&self) -> Option<&EventLog> {
        self.log.as_ref()
    }

    pub fn started(&self) -> bool {
        self.game.is_some()
    }

    pub fn is_finished(&self) -> bool {
        self.game.as_ref().is_some_and(GameState::is_over)
    }

    pub fn seat_count(&self) -> usize {
        self.members.len()
    }

    pub fn seat_for_token(&self, token: &str) -> Option<Seat> {
        self.members
            .iter()
            .position(|m| !m.token.is_empty() && m.token == token)
            .map(|i| Seat(i as u8))
    }

    pub fn timers(&self) -> &BTreeMap<TimerKind, Deadline> {
        &self.timers
    }

    pub fn next_deadline(&self) -> Option<u64> {
        self.timers.values().map(|d| d.at_ms).min()
    }

    /// The last frame sequence number sent to each seat.
    pub fn horizon(&self) -> Vec<u64> {
        self.out_seq.clone()
    }

    /// Seats a new player. `token` is the secret used to reattach later;
    /// frames for the new seat are numbered after `after_seq`.
    pub fn join(
        &mut self,
        name: &str,
        token: &str,
        after_seq: u64,
    ) -> Result<(Seat, Vec<Delivery>), RoomError> {
        let name = name.trim();
        if self.started() {
            return Err(RoomError::GameInProgress);
        }
        if self.members.len() >= MAX_SEATS {
            return Err(RoomError::RoomFull);
        }
        if name.is_empty() {
            return Err(RoomError::EmptyName);
        }
        if self.members.iter().any(|m| m.name == name) {
            return Err(RoomError::NameTaken(name.to_string()));
        }
        self.members.push(Member {
            name: name.to_string(),
            token: token.to_string(),
            ready: false,
            connected: true,
        });
        self.out_seq.push(after_seq);
        let seat = Seat(self.members.len() as u8 - 1);
        let mut out = Vec::new();
        self.send(
            seat,
            ServerEvent::Welcome {
                room_id: self.room_id.clone(),
                seat,
                token: token.to_string(),
            },
            &mut out,
        );
        self.broadcast_lobby(&mut out);
        Ok((seat, out))
    }

    /// Handles one decoded client frame from a seated connection. The
    /// sender always gets an `ack` last.
    pub fn command(&mut self, seat: Seat, frame: &ClientFrame, now_ms: u64) -> Vec<Delivery> {
        let mut out = Vec::new();
        let leaving_lobby = matches!(frame.command, ClientCommand::Leave) && !self.started();
        let result = self.dispatch(seat, &frame.command, now_ms, &mut out);
        if leaving_lobby && result.is_ok() {
            return out;
        }
        let accepted = match result {
            Ok(()) => true,
            Err(err) => {
                let chat = matches!(frame.command, ClientCommand::Chat { .. } | ClientCommand::Pass);
                let event = match (&err, chat) {
                    (RoomError::Rule(rule), true) => ServerEvent::ChatRejected {
                        reason: rule.code().to_string(),
                        detail: rule.to_string(),
                    },
                    _ => err.to_event(),
                };
                self.send(seat, event, &mut out);
                false
            }
        };
        if seat.index() < self.members.len() {
            let horizon = self.horizon();
            self.send(
                seat,
                ServerEvent::Ack {
                    cmd_seq: frame.seq,
                    accepted,
                    horizon,
                },
                &mut out,
            );
        }
        out
    }

    /// Reports a frame the connection could not decode.
    pub fn reject(&mut self, seat: Seat, event: ServerEvent) -> Vec<Delivery> {
        let mut out = Vec::new();
        self.send(seat, event, &mut out);
        out
    }

    fn dispatch(
        &mut self,
        seat: Seat,
        command: &ClientCommand,
        now_ms: u64,
        out: &mut Vec<Delivery>,
    ) -> Result<(), RoomError> {
        if seat.index() >= self.members.len() {
            return Err(RuleError::UnknownSeat.into());
        }
        match command {
            ClientCommand::CreateRoom { .. } | ClientCommand::JoinRoom { .. } => {
                Err(RoomError::AlreadySeated)
            }
            ClientCommand::Ready => self.ready(seat, now_ms, out),
            ClientCommand::Leave => {
                if self.started() {
                    self.set_connected_into(seat, false, now_ms, out)
                } else {
                    self.leave_lobby(seat, out);
                    Ok(())
                }
            }
            ClientCommand::Typing => {
                let game = self.game.as_ref().ok_or(RoomError::NotStarted)?;
                if game.phase != TurnPhase::SelfExplaining {
                    return Err(RuleError::WrongPhase.into());
                }
                if game.reader() != Some(seat) {
                    return Err(RuleError::NotYourTurn.into());
                }
                for other in 0..self.members.len() as u8 {
                    if Seat(other) != seat {
                        self.send(Seat(other), ServerEvent::ReaderTyping { seat }, out);
                    }
                }
                Ok(())
            }
            other => {
                let action = other.to_action().expect("game command")?;
                let game = self.game.as_ref().ok_or(RoomError::NotStarted)?;
                validate_for_phase(&action, seat, game)?;
                self.apply(GameEvent::seat(seat, action), now_ms, out)?;
                self.settle(now_ms, out)
            }
        }
    }

    fn ready(&mut self, seat: Seat, now_ms: u64, out: &mut Vec<Delivery>) -> Result<(), RoomError> {
        if self.started() {
            return Err(RoomError::GameInProgress);
        }
        self.members[seat.index()].ready = true;
        self.broadcast_lobby(out);
        let n = self.members.len();
        if (MIN_SEATS..=MAX_SEATS).contains(&n) && self.members.iter().all(|m| m.ready) {
            self.start(now_ms, out)?;
        }
        Ok(())
    }

    fn leave_lobby(&mut self, seat: Seat, out: &mut Vec<Delivery>) {
        self.members.remove(seat.index());
        self.out_seq.remove(seat.index());
        for i in seat.index()..self.members.len() {
            let token = self.members[i].token.clone();
            self.send(
                Seat(i as u8),
                ServerEvent::Welcome {
                    room_id: self.room_id.clone(),
                    seat: Seat(i as u8),
                    token,
                },
                out,
            );
        }
        self.broadcast_lobby(out);
    }

    fn start(&mut self, now_ms: u64, out: &mut Vec<Delivery>) -> Result<(), RoomError> {
        let ids: Vec<String> = self.members.iter().map(|m| m.name.clone()).collect();
        let game = GameState::new_game(self.config.clone(), &ids, self.corpus.clone(), self.seed)?;
        let header = LogHeader {
            v: LOG_VERSION,
            room_id: self.room_id.clone(),
            seed: self.seed,
            config: self.config.clone(),
            corpus_checksum: self.corpus.checksum().to_string(),
            corpus_title: self.corpus.title().to_string(),
            player_ids: ids,
            initial_hash: canonical_hash(&game),
        };
        if let Some(path) = &self.options.log_path {
            let tokens: Vec<SeatToken> = self
                .members
                .iter()
                .map(|m| SeatToken {
                    name: m.name.clone(),
                    token: m.token.clone(),
                })
                .collect();
            let json = serde_json::to_string_pretty(&tokens).expect("tokens serialize");
            fs::write(tokens_path(path), json)?;
        }
        self.log = Some(EventLog::create(header, self.options.log_path.as_deref())?);
        let opening = game.opening_effects();
        self.game = Some(game);
        for seat in 0..self.members.len() as u8 {
            let snapshot = self.snapshot(Seat(seat));
            self.send(Seat(seat), snapshot, out);
        }
        self.execute(opening, now_ms, out);
        let away: Vec<Seat> = (0..self.members.len())
            .filter(|&i| !self.members[i].connected)
            .map(|i| Seat(i as u8))
            .collect();
        for seat in away {
            self.apply(
                GameEvent::system(Action::SetConnected {
                    seat,
                    connected: false,
                }),
                now_ms,
                out,
            )?;
        }
        self.settle(now_ms, out)
    }

    /// Fires every timer due at `now_ms`. A timer whose phase has already
    /// moved on is dropped without a trace.
    pub fn expire_due(&mut self, now_ms: u64) -> Vec<Delivery> {
        let mut out = Vec::new();
        while let Some((&timer, &deadline)) = self
            .timers
            .iter()
            .filter(|(_, d)| d.at_ms <= now_ms)
            .min_by_key(|(_, d)| d.at_ms)
        {
            self.timers.remove(&timer);
            let event = GameEvent::timer(timer, deadline.round);
            if self.apply(event, now_ms, &mut out).is_ok() {
                if let Err(err) = self.settle(now_ms, &mut out) {
                    tracing::error!(room = %self.room_id, %err, "could not settle after timer");
                }
            }
        }
        out
    }

    /// Records a connection change. In a game this is a logged event.
    pub fn set_connected(&mut self, seat: Seat, connected: bool, now_ms: u64) -> Vec<Delivery> {
        let mut out = Vec::new();
        if let Err(err) = self.set_connected_into(seat, connected, now_ms, &mut out) {
            tracing::debug!(room = %self.room_id, %seat, %err, "connection change ignored");
        }
        out
    }

    fn set_connected_into(
        &mut self,
        seat: Seat,
        connected: bool,
        now_ms: u64,
        out: &mut Vec<Delivery>,
    ) -> Result<(), RoomError> {
        let member = self
            .members
            .get_mut(seat.index())
            .ok_or(RuleError::UnknownSeat)?;
        member.connected = connected;
        match &self.game {
            None => {
                self.broadcast_lobby(out);
                Ok(())
            }
            Some(game) if game.is_over() => Ok(()),
            Some(game) => {
                if game.player(seat).is_some_and(|p| p.connected == connected) {
                    return Ok(());
                }
                self.apply(
                    GameEvent::system(Action::SetConnected { seat, connected }),
                    now_ms,
                    out,
                )?;
                self.settle(now_ms, out)
            }
        }
    }

    /// Brings a (re)attached connection up to date: the lobby before the
    /// game, a redacted snapshot during it.
    pub fn attach(&mut self, seat: Seat, now_ms: u64) -> Vec<Delivery> {
        let mut out = self.set_connected(seat, true, now_ms);
        if self.started() {
            let snapshot = self.snapshot(seat);
            self.send(seat, snapshot, &mut out);
        } else if let Some(m) = self.members.get(seat.index()) {
            let token = m.token.clone();
            self.send(
                seat,
                ServerEvent::Welcome {
                    room_id: self.room_id.clone(),
                    seat,
                    token,
                },
                &mut out,
            );
            self.broadcast_lobby(&mut out);
        }
        out
    }

    /// Makes sure seat `seat`'s next frame number exceeds `seq`.
    pub fn bump_seq(&mut self, seat: Seat, seq: u64) {
        if let Some(s) = self.out_seq.get_mut(seat.index()) {
            *s = (*s).max(seq);
        }
    }

    fn snapshot(&self, seat: Seat) -> ServerEvent {
        let game = self.game.as_ref().expect("snapshot needs a game");
        let mut snapshot = RoomSnapshot::for_seat(game, Some(seat), &self.room_id);
        snapshot.deadline_epoch_ms = timer_for(game.phase)
            .and_then(|t| self.timers.get(&t))
            .map(|d| d.at_ms);
        ServerEvent::RoomState {
            snapshot: Box::new(snapshot),
        }
    }

    /// Write-ahead step: reduce, append to the log, then commit and run
    /// the effects. Nothing is committed if the append fails.
    fn apply(&mut self, event: GameEvent, now_ms: u64, out: &mut Vec<Delivery>) -> Result<(), RoomError> {
        let game = self.game.as_ref().ok_or(RoomError::NotStarted)?;
        let (next, effects) = game.apply_event(&event)?;
        let log = self.log.as_mut().expect("started games have a log");
        log.append(LogRecord {
            seq: log.next_seq(),
            wall_clock_ms: now_ms,
            actor: event.actor,
            action: event.action,
            state_hash: canonical_hash(&next),
        })?;
        self.game = Some(next);
        self.execute(effects, now_ms, out);
        Ok(())
    }

    /// Takes every host step the game is waiting for.
    fn settle(&mut self, now_ms: u64, out: &mut Vec<Delivery>) -> Result<(), RoomError> {
        while let Some(action) = self.game.as_ref().and_then(GameState::pending_system_action) {
            self.apply(GameEvent::system(action), now_ms, out)?;
        }
        Ok(())
    }

    fn rearm_phase_timer(&mut self, now_ms: u64) {
        let Some(game) = &self.game else { return };
        if let Some(timer) = timer_for(game.phase) {
            if !self.timers.contains_key(&timer) {
                let seconds = timer_seconds(&self.config, timer);
                let round = game.round_number;
                self.arm(timer, seconds, round, now_ms);
            }
        }
    }

    fn arm(&mut self, timer: TimerKind, seconds: u32, round: u32, now_ms: u64) {
        let ms = (f64::from(seconds) * 1000.0 / self.options.scale()).round() as u64;
        self.timers.insert(
            timer,
            Deadline {
                at_ms: now_ms + ms,
                round,
            },
        );
    }

    fn execute(&mut self, effects: Vec<Effect>, now_ms: u64, out: &mut Vec<Delivery>) {
        for effect in effects {
            match effect {
                Effect::ArmTimer { timer, seconds } => {
                    let round = self.game.as_ref().map_or(0, |g| g.round_number);
                    self.arm(timer, seconds, round, now_ms);
                }
                Effect::CancelTimer { timer } => {
                    self.timers.remove(&timer);
                }
                Effect::Broadcast { event } => {
                    let event = self.stamp(event);
                    for seat in 0..self.members.len() as u8 {
                        self.send(Seat(seat), event.clone(), out);
                    }
                }
                Effect::SendTo { seat, event } => {
                    let event = self.stamp(event);
                    self.send(seat, event, out);
                }
                Effect::GameEnded { .. } => self.timers.clear(),
            }
        }
    }

    fn stamp(&self, event: ServerEvent) -> ServerEvent {
        match event {
            ServerEvent::PhaseChanged {
                phase,
                round,
                deadline_epoch_ms: None,
            } => ServerEvent::PhaseChanged {
                phase,
                round,
                deadline_epoch_ms: timer_for(phase)
                    .and_then(|t| self.timers.get(&t))
                    .map(|d| d.at_ms),
            },
            other => other,
        }
    }

    fn broadcast_lobby(&mut self, out: &mut Vec<Delivery>) {
        let players: Vec<LobbyPlayer> = self
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| LobbyPlayer {
                seat: Seat(i as u8),
                name: m.name.clone(),
                ready: m.ready,
                connected: m.connected,
            })
            .collect();
        for seat in 0..self.members.len() as u8 {
            self.send(
                Seat(seat),
                ServerEvent::Lobby {
                    room_id: self.room_id.clone(),
                    players: players.clone(),
                },
                out,
            );
        }
    }

    fn send(&mut self, seat: Seat, event: ServerEvent, out: &mut Vec<Delivery>) {
        let Some(seq) = self.out_seq.get_mut(seat.index()) else {
            return;
        };
        *seq += 1;
        out.push(Delivery {
            seat,
            frame: ServerFrame { seq: *seq, event },
        });
    }
}
