use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::config::{EventCard, GameConfig};
use crate::corpus::{TargetView, TextCorpus};
use crate::error::SetupError;
use crate::event::Seat;
use crate::rng::Pcg32;
use crate::strategy::Strategy;

use super::tally::VoteOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TurnPhase {
    Lobby,
    StrategyAssigned,
    SelfExplaining,
    Voting,
    Reveal,
    Debating,
    Revoting,
    Resolving,
    CardDraw,
    GameOver,
}

impl TurnPhase {
    /// Phases the host advances with [`crate::event::Action::Advance`]
    /// as soon as it observes them.
    pub fn is_transient(self) -> bool {
        matches!(
            self,
            TurnPhase::StrategyAssigned
                | TurnPhase::Reveal
                | TurnPhase::Resolving
                | TurnPhase::CardDraw
        )
    }

    pub fn after_reveal(self) -> bool {
        matches!(
            self,
            TurnPhase::Reveal
                | TurnPhase::Debating
                | TurnPhase::Revoting
                | TurnPhase::Resolving
                | TurnPhase::CardDraw
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlayerState {
    pub player_id: String,
    pub seat: Seat,
    pub points: u32,
    pub board_position: u32,
    pub previous_assigned_strategy: Option<Strategy>,
    /// Reading turns still to be skipped.
    pub frozen_turns: u32,
    pub connected: bool,
    pub hand: Vec<EventCard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundState {
    pub reader_seat: Seat,
    pub assigned_strategy: Strategy,
    /// Position of this round's target in the corpus target list.
    pub target_position: usize,
    pub target_sentence_index: usize,
    pub self_explanation: Option<String>,
    /// First ballot. A key is present once that seat voted; when the ballot
    /// closes every non-reader seat is present and `None` is an abstention.
    pub votes: BTreeMap<Seat, Option<Strategy>>,
    pub revotes: BTreeMap<Seat, Option<Strategy>>,
    pub debate_messages_used: BTreeMap<Seat, u32>,
    pub debate_open: bool,
    pub debated: bool,
    pub is_extra_turn: bool,
    pub forfeited: bool,
    pub outcome: Option<VoteOutcome>,
}

impl RoundState {
    /// Votes that decide the round: the revote after a debate, else the
    /// first ballot.
    pub fn final_votes(&self) -> &BTreeMap<Seat, Option<Strategy>> {
        if self.debated {
            &self.revotes
        } else {
            &self.votes
        }
    }
}

/// The corpus a game reads from and how far it has got. Serialized by
/// checksum only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCursor {
    pub corpus: Arc<TextCorpus>,
    pub position: usize,
}

impl Serialize for CorpusCursor {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            checksum: &'a str,
            position: usize,
        }
        Repr {
            checksum: self.corpus.checksum(),
            position: self.position,
        }
        .serialize(serializer)
    }
}

impl CorpusCursor {
    pub fn current(&self) -> Option<TargetView<'_>> {
        self.corpus.target_cursor(self.position)
    }
}

/// The authoritative snapshot of one game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameState {
    pub config: GameConfig,
    pub players: Vec<PlayerState>,
    pub phase: TurnPhase,
    pub round: Option<RoundState>,
    pub corpus: CorpusCursor,
    pub event_deck: Vec<EventCard>,
    pub discard_pile: Vec<EventCard>,
    pub rng: Pcg32,
    pub round_number: u32,
    pub pending_extra_turn_for: Option<Seat>,
    /// Reader of the most recent regular (non-bonus) round; rotation
    /// continues from here.
    pub rotation_seat: Seat,
}

impl GameState {
    pub fn new_game(
        config: GameConfig,
        player_ids: &[String],
        corpus: Arc<TextCorpus>,
        seed: u64,
    ) -> Result<GameState, SetupError> {
        if !(3..=4).contains(&player_ids.len()) {
            return Err(SetupError::InvalidPlayerCount(player_ids.len()));
        }
        for (i, id) in player_ids.iter().enumerate() {
            if player_ids[..i].contains(id) {
                return Err(SetupError::DuplicatePlayer(id.clone()));
            }
        }
        if corpus.target_count() == 0 {
            return Err(SetupError::EmptyCorpus);
        }
        config.validate()?;

        let mut rng = Pcg32::for_game(seed);
        let mut event_deck = config.build_deck();
        rng.shuffle(&mut event_deck);

        let players = player_ids
            .iter()
            .enumerate()
            .map(|(i, id)| PlayerState {
                player_id: id.clone(),
                seat: Seat(i as u8),
                points: 0,
                board_position: 0,
                previous_assigned_strategy: None,
                frozen_turns: 0,
                connected: true,
                hand: Vec::new(),
            })
            .collect();

        let mut state = GameState {
            config,
            players,
            phase: TurnPhase::StrategyAssigned,
            round: None,
            corpus: CorpusCursor {
                corpus,
                position: 0,
            },
            event_deck,
            discard_pile: Vec::new(),
            rng,
            round_number: 1,
            pending_extra_turn_for: None,
            rotation_seat: Seat(0),
        };
        state.begin_round(Seat(0), false);
        Ok(state)
    }

    pub fn reader(&self) -> Option<Seat> {
        self.round.as_ref().map(|r| r.reader_seat)
    }

    pub fn player(&self, seat: Seat) -> Option<&PlayerState> {
        self.players.get(seat.index())
    }

    pub(crate) fn player_mut(&mut self, seat: Seat) -> &mut PlayerState {
        &mut self.players[seat.index()]
    }

    pub fn seats(&self) -> impl Iterator<Item = Seat> + '_ {
        (0..self.players.len()).map(|i| Seat(i as u8))
    }

    pub fn non_readers(&self) -> Vec<Seat> {
        let reader = self.reader();
        self.seats().filter(|s| Some(*s) != reader).collect()
    }

    pub fn is_over(&self) -> bool {
        self.phase == TurnPhase::GameOver
    }

    /// The host action due in the current phase, if it is transient.
    pub fn pending_system_action(&self) -> Option<crate::event::Action> {
        self.phase
            .is_transient()
            .then_some(crate::event::Action::Advance)
    }

    /// Sets up round state for `reader` at the current corpus position and
    /// draws the assigned strategy.
    pub(crate) fn begin_round(&mut self, reader: Seat, is_extra_turn: bool) {
        let target = self
            .corpus
            .current()
            .expect("a round only begins while targets remain");
        let target_sentence_index = target.sentence.index;
        let previous = self.players[reader.index()].previous_assigned_strategy;
        let exclude: Vec<Strategy> = previous.into_iter().collect();
        let assigned_strategy = draw_strategy(&mut self.rng, &exclude);
        self.round = Some(RoundState {
            reader_seat: reader,
            assigned_strategy,
            target_position: self.corpus.position,
            target_sentence_index,
            self_explanation: None,
            votes: BTreeMap::new(),
            revotes: BTreeMap::new(),
            debate_messages_used: BTreeMap::new(),
            debate_open: false,
            debated: false,
            is_extra_turn,
            forfeited: false,
            outcome: None,
        });
        self.phase = TurnPhase::StrategyAssigned;
    }
}

/// Uniform draw from the five strategies minus `exclude`.
pub fn draw_strategy(rng: &mut Pcg32, exclude: &[Strategy]) -> Strategy {
    let candidates: Vec<Strategy> = Strategy::ALL
        .into_iter()
        .filter(|s| !exclude.contains(s))
        .collect();
    rng.pick(&candidates)
}
