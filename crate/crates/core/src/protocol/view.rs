//! What one seat is allowed to see of a game.
//!
//! The assigned strategy is visible only to the reader until the reveal.
//! First-ballot votes appear from the reveal on; revotes only in
//! `TurnResolved`. Nobody sees another player's previous strategies or
//! power cards.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{EventCard, GameConfig};
use crate::event::Seat;
use crate::rules::{standings, GameState, Standing, TurnPhase};
use crate::strategy::Strategy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerView {
    pub player_id: String,
    pub seat: Seat,
    pub points: u32,
    pub board_position: u32,
    pub frozen_turns: u32,
    pub connected: bool,
    pub hand_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetText {
    pub sentence_index: usize,
    pub sentence: String,
    pub context: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomSnapshot {
    pub room_id: String,
    pub my_seat: Option<Seat>,
    pub config: GameConfig,
    pub phase: TurnPhase,
    pub round_number: u32,
    pub players: Vec<PlayerView>,
    /// The recipient's own power cards.
    pub my_hand: Vec<EventCard>,
    pub reader_seat: Option<Seat>,
    pub is_extra_turn: bool,
    pub target: Option<TargetText>,
    pub assigned_strategy: Option<Strategy>,
    pub self_explanation: Option<String>,
    /// Whether the recipient has voted in the open ballot.
    pub has_voted: bool,
    pub votes: Option<BTreeMap<Seat, Option<Strategy>>>,
    pub messages_remaining: Option<BTreeMap<Seat, u32>>,
    pub pending_extra_turn_for: Option<Seat>,
    pub deadline_epoch_ms: Option<u64>,
    pub standings: Option<Vec<Standing>>,
}

impl RoomSnapshot {
    pub fn for_seat(game: &GameState, seat: Option<Seat>, room_id: &str) -> Self {
        let round = game.round.as_ref();
        let is_reader = seat.is_some() && round.map(|r| r.reader_seat) == seat;
        let revealed = game.phase.after_reveal();
        let my_hand = seat
            .and_then(|s| game.player(s))
            .map(|p| p.hand.clone())
            .unwrap_or_default();
        let has_voted = match (game.phase, round, seat) {
            (TurnPhase::Voting, Some(r), Some(s)) => r.votes.contains_key(&s),
            (TurnPhase::Revoting, Some(r), Some(s)) => r.revotes.contains_key(&s),
            _ => false,
        };
        let max = game.config.debate_max_messages;
        RoomSnapshot {
            room_id: room_id.to_string(),
            my_seat: seat,
            config: game.config.clone(),
            phase: game.phase,
            round_number: game.round_number,
            players: game
                .players
                .iter()
                .map(|p| PlayerView {
                    player_id: p.player_id.clone(),
                    seat: p.seat,
                    points: p.points,
                    board_position: p.board_position,
                    frozen_turns: p.frozen_turns,
                    connected: p.connected,
                    hand_size: p.hand.len(),
                })
                .collect(),
            my_hand,
            reader_seat: round.map(|r| r.reader_seat),
            is_extra_turn: round.is_some_and(|r| r.is_extra_turn),
            target: game.corpus.current().filter(|_| round.is_some()).map(|t| TargetText {
                sentence_index: t.sentence.index,
                sentence: t.sentence.text.clone(),
                context: t.context.iter().map(|s| s.text.clone()).collect(),
            }),
            assigned_strategy: round
                .filter(|_| is_reader || revealed)
                .map(|r| r.assigned_strategy),
            self_explanation: round.and_then(|r| r.self_explanation.clone()),
            has_voted,
            votes: round.filter(|_| revealed).map(|r| r.votes.clone()),
            messages_remaining: round.filter(|r| r.debate_open).map(|r| {
                r.debate_messages_used
                    .iter()
                    .map(|(s, used)| (*s, max.saturating_sub(*used)))
                    .collect()
            }),
            pending_extra_turn_for: game.pending_extra_turn_for,
            deadline_epoch_ms: None,
            standings: game.is_over().then(|| standings(game)),
        }
    }
}
