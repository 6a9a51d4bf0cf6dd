use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{EventCard, GameConfig};
use crate::event::{Action, PurchaseKind, Seat};
use crate::protocol::view::RoomSnapshot;
use crate::rules::{Standing, TurnPhase, VoteOutcome};
use crate::strategy::Strategy;

/// Commands a client sends. On the wire each is a JSON object tagged by `t`
/// and carrying a per-connection `seq` (see [`super::codec`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum ClientCommand {
    CreateRoom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<GameConfig>,
        /// A corpus known to the server; the default corpus when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corpus_id: Option<String>,
        /// Fixes the game seed, for reproducible sessions.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    JoinRoom {
        room_id: String,
        display_name: String,
    },
    Ready,
    SubmitSelfExplanation {
        text: String,
    },
    CastVote {
        strategy: Strategy,
    },
    Chat {
        text: String,
    },
    /// Gives up the sender's remaining debate messages.
    Pass,
    Purchase {
        kind: PurchaseTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Seat>,
    },
    PlayCard {
        card_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Seat>,
    },
    Leave,
    /// Advisory heartbeat from the reader while composing. Never logged.
    Typing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurchaseTag {
    ChangeStrategy,
    ExtraTurn,
    Freeze,
    ExtraCard,
}

impl ClientCommand {
    pub const TAGS: [&'static str; 11] = [
        "create_room",
        "join_room",
        "ready",
        "submit_self_explanation",
        "cast_vote",
        "chat",
        "pass",
        "purchase",
        "play_card",
        "leave",
        "typing",
    ];

    /// The in-game reducer action for this command, or `None` for room-level
    /// commands (create, join, ready, leave).
    pub fn to_action(&self) -> Option<Result<Action, crate::error::RuleError>> {
        let action = match self {
            ClientCommand::SubmitSelfExplanation { text } => {
                Action::SubmitSelfExplanation { text: text.clone() }
            }
            ClientCommand::CastVote { strategy } => Action::CastVote {
                strategy: *strategy,
            },
            ClientCommand::Chat { text } => Action::Chat { text: text.clone() },
            ClientCommand::Pass => Action::PassDebate,
            ClientCommand::Purchase { kind, target } => {
                let purchase = match (kind, target) {
                    (PurchaseTag::ChangeStrategy, _) => PurchaseKind::ChangeStrategy,
                    (PurchaseTag::ExtraTurn, _) => PurchaseKind::ExtraTurn,
                    (PurchaseTag::ExtraCard, _) => PurchaseKind::ExtraCard,
                    (PurchaseTag::Freeze, Some(target)) => PurchaseKind::Freeze { target: *target },
                    (PurchaseTag::Freeze, None) => {
                        return Some(Err(crate::error::RuleError::IllegalPayload(
                            "freeze needs a target".into(),
                        )))
                    }
                };
                Action::Purchase { purchase }
            }
            ClientCommand::PlayCard { card_id, target } => Action::PlayCard {
                card_id: card_id.clone(),
                target: *target,
            },
            ClientCommand::CreateRoom { .. }
            | ClientCommand::JoinRoom { .. }
            | ClientCommand::Ready
            | ClientCommand::Leave
            | ClientCommand::Typing => return None,
        };
        Some(Ok(action))
    }
}

/// Which ballot a vote belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ballot {
    Vote,
    Revote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaidWith {
    Points,
    Card,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenKind {
    Hidden,
}

/// A drawn card as seen by one recipient: power cards are hidden from
/// everyone but the holder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CardView {
    Revealed(EventCard),
    Hidden { kind: HiddenKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LobbyPlayer {
    pub seat: Seat,
    pub name: String,
    pub ready: bool,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub seat: Seat,
    pub points: u32,
    pub board_position: u32,
    pub frozen_turns: u32,
    pub hand_size: usize,
    pub connected: bool,
}

/// Events the server sends. Tagged by `t`; the server adds a per-recipient
/// increasing `seq` when framing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum ServerEvent {
    RoomCreated {
        room_id: String,
    },
    Welcome {
        room_id: String,
        seat: Seat,
        token: String,
    },
    Lobby {
        room_id: String,
        players: Vec<LobbyPlayer>,
    },
    RoomState {
        snapshot: Box<RoomSnapshot>,
    },
    PhaseChanged {
        phase: TurnPhase,
        round: u32,
        #[serde(default)]
        deadline_epoch_ms: Option<u64>,
    },
    RoundStarted {
        round: u32,
        reader_seat: Seat,
        reader_name: String,
        sentence_index: usize,
        sentence: String,
        context: Vec<String>,
        is_extra_turn: bool,
    },
    /// Sent to the reader only.
    StrategyAssigned {
        strategy: Strategy,
    },
    ReaderBusy {
        reader_name: String,
    },
    /// Relayed reader heartbeat; carries no game state.
    ReaderTyping {
        seat: Seat,
    },
    SelfExplanationPosted {
        seat: Seat,
        text: String,
    },
    /// Sent to the voter only; does not echo the choice.
    VoteAccepted {
        ballot: Ballot,
    },
    VoteProgress {
        ballot: Ballot,
        cast: usize,
        eligible: usize,
    },
    VotesRevealed {
        votes: BTreeMap<Seat, Option<Strategy>>,
        assigned: Strategy,
    },
    DebateStarted {
        seconds_remaining: u32,
        messages_remaining: BTreeMap<Seat, u32>,
    },
    ChatPosted {
        seat: Seat,
        text: String,
        messages_remaining: u32,
    },
    ChatPassed {
        seat: Seat,
    },
    ChatRejected {
        reason: String,
        detail: String,
    },
    TurnResolved {
        reader_seat: Seat,
        forfeited: bool,
        #[serde(default)]
        outcome: Option<VoteOutcome>,
        #[serde(default)]
        final_votes: Option<BTreeMap<Seat, Option<Strategy>>>,
        #[serde(default)]
        awards: BTreeMap<Seat, u32>,
        #[serde(default)]
        dice: Option<[u32; 2]>,
        #[serde(default)]
        movement: Option<u32>,
    },
    CardDrawn {
        seat: Seat,
        card: CardView,
    },
    PurchaseApplied {
        seat: Seat,
        kind: PurchaseTag,
        #[serde(default)]
        target: Option<Seat>,
        paid_with: PaidWith,
    },
    Scoreboard {
        players: Vec<ScoreLine>,
        #[serde(default)]
        pending_extra_turn_for: Option<Seat>,
    },
    GameOver {
        standings: Vec<Standing>,
    },
    Error {
        code: String,
        detail: String,
    },
    /// Sent to the sender after every command. `horizon[s]` is the last
    /// frame sequence number delivered to seat `s` at the time of the ack,
    /// which lets a lock-step harness wait for every client to catch up.
    Ack {
        cmd_seq: u64,
        accepted: bool,
        horizon: Vec<u64>,
    },
}

impl ServerEvent {
    pub const TAGS: [&'static str; 24] = [
        "room_created",
        "welcome",
        "lobby",
        "room_state",
        "phase_changed",
        "round_started",
        "strategy_assigned",
        "reader_busy",
        "reader_typing",
        "self_explanation_posted",
        "vote_accepted",
        "vote_progress",
        "votes_revealed",
        "debate_started",
        "chat_posted",
        "chat_passed",
        "chat_rejected",
        "turn_resolved",
        "card_drawn",
        "purchase_applied",
        "scoreboard",
        "game_over",
        "error",
        "ack",
    ];

    pub fn error(err: &crate::error::RuleError) -> Self {
        ServerEvent::Error {
            code: err.code().to_string(),
            detail: err.to_string(),
        }
    }
}

impl From<PurchaseKind> for PurchaseTag {
    fn from(kind: PurchaseKind) -> Self {
        match kind {
            PurchaseKind::ChangeStrategy => PurchaseTag::ChangeStrategy,
            PurchaseKind::ExtraTurn => PurchaseTag::ExtraTurn,
            PurchaseKind::Freeze { .. } => PurchaseTag::Freeze,
            PurchaseKind::ExtraCard => PurchaseTag::ExtraCard,
        }
    }
}
