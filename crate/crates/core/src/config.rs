//! Game configuration and the event-card deck.

use serde::{Deserialize, Serialize};

use crate::error::SetupError;

/// What an event card does when drawn or played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CardKind {
    /// Moves the drawer immediately; never held.
    Move { delta: i32 },
    PowerExtraTurn,
    PowerFreeze,
    PowerExtraCard,
}

impl CardKind {
    pub fn is_power(self) -> bool {
        !matches!(self, CardKind::Move { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventCard {
    pub card_id: String,
    #[serde(flatten)]
    pub kind: CardKind,
}

/// Tunable rule parameters. Every field has a default, so partial JSON
/// objects deserialize.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub points_reader_on_majority: u32,
    pub points_voter_on_match: u32,
    pub cost_change_strategy: u32,
    pub cost_extra_turn: u32,
    pub cost_freeze: u32,
    pub cost_extra_card: u32,
    pub debate_seconds: u32,
    pub debate_max_messages: u32,
    pub vote_seconds: u32,
    pub self_explain_seconds: u32,
    pub max_rounds: u32,
    pub dice_faces: u32,
    pub deck_spec: Vec<CardKind>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            points_reader_on_majority: 3,
            points_voter_on_match: 1,
            cost_change_strategy: 2,
            cost_extra_turn: 5,
            cost_freeze: 4,
            cost_extra_card: 3,
            debate_seconds: 180,
            debate_max_messages: 3,
            vote_seconds: 60,
            self_explain_seconds: 300,
            max_rounds: 40,
            dice_faces: 6,
            deck_spec: default_deck_spec(),
        }
    }
}

pub fn default_deck_spec() -> Vec<CardKind> {
    let mut deck: Vec<CardKind> = [1, 1, 2, 2, 3, -1, -1, -2]
        .into_iter()
        .map(|delta| CardKind::Move { delta })
        .collect();
    for kind in [
        CardKind::PowerExtraTurn,
        CardKind::PowerFreeze,
        CardKind::PowerExtraCard,
    ] {
        deck.extend(std::iter::repeat_n(kind, 4));
    }
    deck
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), SetupError> {
        let positive = [
            ("points_reader_on_majority", self.points_reader_on_majority),
            ("points_voter_on_match", self.points_voter_on_match),
            ("cost_change_strategy", self.cost_change_strategy),
            ("cost_extra_turn", self.cost_extra_turn),
            ("cost_freeze", self.cost_freeze),
            ("cost_extra_card", self.cost_extra_card),
            ("debate_seconds", self.debate_seconds),
            ("debate_max_messages", self.debate_max_messages),
            ("vote_seconds", self.vote_seconds),
            ("self_explain_seconds", self.self_explain_seconds),
            ("max_rounds", self.max_rounds),
            ("dice_faces", self.dice_faces),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(SetupError::BadConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// The configured deck in canonical (unshuffled) order with ids assigned.
    pub fn build_deck(&self) -> Vec<EventCard> {
        self.deck_spec
            .iter()
            .enumerate()
            .map(|(i, &kind)| EventCard {
                card_id: format!("c{i:02}"),
                kind,
            })
            .collect()
    }

    pub fn purchase_cost(&self, kind: crate::event::PurchaseKind) -> u32 {
        use crate::event::PurchaseKind;
        match kind {
            PurchaseKind::ChangeStrategy => self.cost_change_strategy,
            PurchaseKind::ExtraTurn => self.cost_extra_turn,
            PurchaseKind::Freeze { .. } => self.cost_freeze,
            PurchaseKind::ExtraCard => self.cost_extra_card,
        }
    }
}
