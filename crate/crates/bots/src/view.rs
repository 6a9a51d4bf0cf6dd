//! A client's picture of the room, rebuilt only from the frames it was sent.

use std::collections::BTreeMap;

use miboard_core::config::{CardKind, EventCard, GameConfig};
use miboard_core::protocol::messages::{CardView, LobbyPlayer, PaidWith, PurchaseTag, ScoreLine};
use miboard_core::protocol::{ServerEvent, ServerFrame};
use miboard_core::rules::Standing;
use miboard_core::{Seat, Strategy, TurnPhase};

#[derive(Debug, Clone)]
pub struct ClientView {
    pub room_id: Option<String>,
    pub seat: Option<Seat>,
    pub token: Option<String>,
    pub last_seq: u64,
    pub lobby: Vec<LobbyPlayer>,
    pub config: GameConfig,
    pub phase: TurnPhase,
    /// Local clock reading when the current phase was first observed.
    pub phase_since_ms: u64,
    pub round: u32,
    pub deadline_epoch_ms: Option<u64>,
    pub reader: Option<Seat>,
    pub is_extra_turn: bool,
    pub sentence_index: Option<usize>,
    /// Only ever set for the reader before the reveal.
    pub assigned: Option<Strategy>,
    pub self_explanation: Option<String>,
    /// Whether this seat has voted in the open ballot.
    pub voted: bool,
    pub messages_remaining: BTreeMap<Seat, u32>,
    pub revealed: Option<BTreeMap<Seat, Option<Strategy>>>,
    pub players: Vec<ScoreLine>,
    pub hand: Vec<EventCard>,
    pub pending_extra_turn_for: Option<Seat>,
    pub standings: Option<Vec<Standing>>,
    /// Codes of every error or chat rejection received.
    pub rejections: Vec<String>,
    /// A command sent and not yet acknowledged.
    pub awaiting_ack: Option<u64>,
    pub last_ack: Option<(u64, bool, Vec<u64>)>,
    /// The round and phase of this seat's last purchase attempt.
    pub purchased_in: Option<(u32, TurnPhase)>,
}

impl Default for ClientView {
    fn default() -> Self {
        ClientView {
            room_id: None,
            seat: None,
            token: None,
            last_seq: 0,
            lobby: Vec::new(),
            config: GameConfig::default(),
            phase: TurnPhase::Lobby,
            phase_since_ms: 0,
            round: 0,
            deadline_epoch_ms: None,
            reader: None,
            is_extra_turn: false,
            sentence_index: None,
            assigned: None,
            self_explanation: None,
            voted: false,
            messages_remaining: BTreeMap::new(),
            revealed: None,
            players: Vec::new(),
            hand: Vec::new(),
            pending_extra_turn_for: None,
            standings: None,
            rejections: Vec::new(),
            awaiting_ack: None,
            last_ack: None,
            purchased_in: None,
        }
    }
}

impl ClientView {
    pub fn is_reader(&self) -> bool {
        self.seat.is_some() && self.seat == self.reader
    }

    pub fn is_over(&self) -> bool {
        self.phase == TurnPhase::GameOver
    }

    pub fn my_points(&self) -> u32 {
        self.seat
            .and_then(|s| self.players.iter().find(|p| p.seat == s))
            .map_or(0, |p| p.points)
    }

    pub fn my_messages_remaining(&self) -> u32 {
        self.seat
            .and_then(|s| self.messages_remaining.get(&s).copied())
            .unwrap_or(0)
    }

    /// Cards neither held by anyone nor drawn yet, counting the discard pile.
    pub fn cards_in_circulation(&self) -> usize {
        let held: usize = self.players.iter().map(|p| p.hand_size).sum();
        self.config.deck_spec.len().saturating_sub(held)
    }

    pub fn apply(&mut self, frame: &ServerFrame, now_ms: u64) {
        self.last_seq = frame.seq;
        match &frame.event {
            ServerEvent::RoomCreated { room_id } => self.room_id = Some(room_id.clone()),
            ServerEvent::Welcome { room_id, seat, token } => {
                self.room_id = Some(room_id.clone());
                self.seat = Some(*seat);
                self.token = Some(token.clone());
            }
            ServerEvent::Lobby { players, .. } => self.lobby = players.clone(),
            ServerEvent::RoomState { snapshot } => {
                let s = snapshot.as_ref();
                self.room_id = Some(s.room_id.clone());
                self.seat = s.my_seat;
                self.config = s.config.clone();
                self.set_phase(s.phase, now_ms);
                self.round = s.round_number;
                self.deadline_epoch_ms = s.deadline_epoch_ms;
                self.reader = s.reader_seat;
                self.is_extra_turn = s.is_extra_turn;
                self.sentence_index = s.target.as_ref().map(|t| t.sentence_index);
                self.assigned = s.assigned_strategy;
                self.self_explanation = s.self_explanation.clone();
                self.voted = s.has_voted;
                self.messages_remaining = s.messages_remaining.clone().unwrap_or_default();
                self.revealed = s.votes.clone();
                self.players = s
                    .players
                    .iter()
                    .map(|p| ScoreLine {
                        seat: p.seat,
                        points: p.points,
                        board_position: p.board_position,
                        frozen_turns: p.frozen_turns,
                        hand_size: p.hand_size,
                        connected: p.connected,
                    })
                    .collect();
                self.hand = s.my_hand.clone();
                self.pending_extra_turn_for = s.pending_extra_turn_for;
                self.standings = s.standings.clone();
            }
            ServerEvent::PhaseChanged {
                phase,
                round,
                deadline_epoch_ms,
            } => {
                if matches!(phase, TurnPhase::Voting | TurnPhase::Revoting) {
                    self.voted = false;
                }
                self.set_phase(*phase, now_ms);
                self.round = *round;
                self.deadline_epoch_ms = *deadline_epoch_ms;
            }
            ServerEvent::RoundStarted {
                round,
                reader_seat,
                sentence_index,
                is_extra_turn,
                ..
            } => {
                self.round = *round;
                self.reader = Some(*reader_seat);
                self.sentence_index = Some(*sentence_index);
                self.is_extra_turn = *is_extra_turn;
                self.assigned = None;
                self.self_explanation = None;
                self.voted = false;
                self.messages_remaining.clear();
                self.revealed = None;
            }
            ServerEvent::StrategyAssigned { strategy } => self.assigned = Some(*strategy),
            ServerEvent::SelfExplanationPosted { text, .. } => self.self_explanation = Some(text.clone()),
            ServerEvent::VoteAccepted { .. } => self.voted = true,
            ServerEvent::VotesRevealed { votes, .. } => self.revealed = Some(votes.clone()),
            ServerEvent::DebateStarted {
                messages_remaining, ..
            } => self.messages_remaining = messages_remaining.clone(),
            ServerEvent::ChatPosted {
                seat,
                messages_remaining,
                ..
            } => {
                self.messages_remaining.insert(*seat, *messages_remaining);
            }
            ServerEvent::ChatPassed { seat } => {
                self.messages_remaining.insert(*seat, 0);
            }
            ServerEvent::CardDrawn { seat, card } => {
                if Some(*seat) == self.seat {
                    if let CardView::Revealed(card) = card {
                        if card.kind.is_power() {
                            self.hand.push(card.clone());
                        }
                    }
                }
            }
            ServerEvent::PurchaseApplied {
                seat, kind, paid_with, ..
            } => {
                if Some(*seat) == self.seat && *paid_with == PaidWith::Card {
                    let card_kind = match kind {
                        PurchaseTag::ExtraTurn => Some(CardKind::PowerExtraTurn),
                        PurchaseTag::Freeze => Some(CardKind::PowerFreeze),
                        PurchaseTag::ExtraCard => Some(CardKind::PowerExtraCard),
                        PurchaseTag::ChangeStrategy => None,
                    };
                    if let Some(i) = card_kind.and_then(|k| self.hand.iter().position(|c| c.kind == k)) {
                        self.hand.remove(i);
                    }
                }
            }
            ServerEvent::Scoreboard {
                players,
                pending_extra_turn_for,
            } => {
                self.players = players.clone();
                self.pending_extra_turn_for = *pending_extra_turn_for;
            }
            ServerEvent::GameOver { standings } => {
                self.standings = Some(standings.clone());
                self.set_phase(TurnPhase::GameOver, now_ms);
            }
            ServerEvent::Error { code, .. } => self.rejections.push(code.clone()),
            ServerEvent::ChatRejected { reason, .. } => self.rejections.push(reason.clone()),
            ServerEvent::Ack {
                cmd_seq,
                accepted,
                horizon,
            } => {
                if self.awaiting_ack == Some(*cmd_seq) {
                    self.awaiting_ack = None;
                }
                self.last_ack = Some((*cmd_seq, *accepted, horizon.clone()));
            }
            ServerEvent::ReaderBusy { .. }
            | ServerEvent::ReaderTyping { .. }
            | ServerEvent::VoteProgress { .. }
            | ServerEvent::TurnResolved { .. } => {}
        }
    }

    fn set_phase(&mut self, phase: TurnPhase, now_ms: u64) {
        if phase != self.phase {
            self.phase_since_ms = now_ms;
        }
        self.phase = phase;
    }
}
