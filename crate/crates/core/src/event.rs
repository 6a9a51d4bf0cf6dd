//! Inputs to the reducer. A game is fully determined by its seed and the
//! ordered list of [`GameEvent`]s applied to it.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize};

use crate::strategy::Strategy;

/// A seat at the table, 0-based in join order.
///
/// Serializes as a bare integer. Decoding also accepts a numeric string,
/// which is how seats appear as JSON object keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Seat(pub u8);

impl<'de> Deserialize<'de> for Seat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SeatVisitor;

        impl de::Visitor<'_> for SeatVisitor {
            type Value = Seat;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a seat number")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Seat, E> {
                u8::try_from(v)
                    .map(Seat)
                    .map_err(|_| E::invalid_value(de::Unexpected::Unsigned(v), &self))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Seat, E> {
                u8::try_from(v)
                    .map(Seat)
                    .map_err(|_| E::invalid_value(de::Unexpected::Signed(v), &self))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Seat, E> {
                v.parse()
                    .map(Seat)
                    .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }

        deserializer.deserialize_any(SeatVisitor)
    }
}

impl Seat {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seat {}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    SelfExplain,
    Vote,
    Revote,
    Debate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Seat(Seat),
    Timer,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PurchaseKind {
    ChangeStrategy,
    ExtraTurn,
    Freeze { target: Seat },
    ExtraCard,
}

impl PurchaseKind {
    pub fn name(self) -> &'static str {
        match self {
            PurchaseKind::ChangeStrategy => "change_strategy",
            PurchaseKind::ExtraTurn => "extra_turn",
            PurchaseKind::Freeze { .. } => "freeze",
            PurchaseKind::ExtraCard => "extra_card",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    /// Moves the game out of a transient phase (assignment, reveal,
    /// resolution, card draw). Issued by the host, never by a player.
    Advance,
    SubmitSelfExplanation { text: String },
    CastVote { strategy: Strategy },
    Chat { text: String },
    PassDebate,
    Purchase { purchase: PurchaseKind },
    PlayCard {
        card_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Seat>,
    },
    TimerExpired { timer: TimerKind, round: u32 },
    SetConnected { seat: Seat, connected: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameEvent {
    pub actor: Actor,
    pub action: Action,
}

impl GameEvent {
    pub fn seat(seat: Seat, action: Action) -> Self {
        GameEvent {
            actor: Actor::Seat(seat),
            action,
        }
    }

    pub fn system(action: Action) -> Self {
        GameEvent {
            actor: Actor::System,
            action,
        }
    }

    pub fn timer(timer: TimerKind, round: u32) -> Self {
        GameEvent {
            actor: Actor::Timer,
            action: Action::TimerExpired { timer, round },
        }
    }
}
