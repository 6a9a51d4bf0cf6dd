//! The game reducer: `(state, event) -> (state', effects)`.
//!
//! One accepted event moves the phase along at most one edge:
//!
//! ```text
//! StrategyAssigned --advance--> SelfExplaining --submit--> Voting --last vote / timer--> Reveal
//! SelfExplaining --timer (forfeit)--> Resolving
//! Reveal --advance--> Resolving          (unanimous match)
//! Reveal --advance--> Debating           (any disagreement or abstention)
//! Debating --timer / all voters done--> Revoting --last revote / timer--> Resolving
//! Resolving --advance--> CardDraw        (majority matched)
//! Resolving --advance--> StrategyAssigned | GameOver
//! CardDraw --advance--> StrategyAssigned | GameOver
//! ```

use std::collections::BTreeMap;

use crate::config::{CardKind, EventCard};
use crate::effect::Effect;
use crate::error::RuleError;
use crate::event::{Action, Actor, GameEvent, PurchaseKind, Seat, TimerKind};
use crate::protocol::messages::{Ballot, CardView, HiddenKind, PaidWith, ScoreLine};
use crate::protocol::validate::validate_for_phase;
use crate::protocol::ServerEvent;
use crate::strategy::Strategy;

use super::standings::standings;
use super::state::{draw_strategy, GameState, TurnPhase};
use super::tally::{needs_debate, tally_votes, VoteOutcome};

type Effects = Vec<Effect>;

enum Payment<'a> {
    /// Use a matching held power card if there is one, otherwise points.
    Preferred,
    Card(&'a str),
}

enum Plan {
    Card(usize),
    Points(u32),
}

impl GameState {
    /// Applies one event. On error `self` is untouched and nothing is
    /// emitted.
    pub fn apply_event(&self, event: &GameEvent) -> Result<(GameState, Effects), RuleError> {
        let mut next = self.clone();
        let mut fx = Vec::new();
        next.reduce(event, &mut fx)?;
        Ok((next, fx))
    }

    /// Effects announcing the current round; used when a game is created.
    pub fn opening_effects(&self) -> Effects {
        let mut fx = Vec::new();
        self.round_start_effects(&mut fx);
        fx
    }

    fn reduce(&mut self, event: &GameEvent, fx: &mut Effects) -> Result<(), RuleError> {
        if self.is_over() {
            return Err(RuleError::GameAlreadyOver);
        }
        match (event.actor, &event.action) {
            (Actor::System, Action::Advance) => self.advance(fx),
            (Actor::System, Action::SetConnected { seat, connected }) => {
                let player = self
                    .players
                    .get_mut(seat.index())
                    .ok_or(RuleError::UnknownSeat)?;
                if player.connected == *connected {
                    return Err(RuleError::IllegalPayload("connection state unchanged".into()));
                }
                player.connected = *connected;
                fx.push(self.broadcast_scoreboard());
                Ok(())
            }
            (Actor::Timer, Action::TimerExpired { timer, round }) => {
                self.expire_timer(*timer, *round, fx)
            }
            (Actor::Seat(seat), action) => {
                validate_for_phase(action, seat, self)?;
                self.seat_action(seat, action, fx)
            }
            _ => Err(RuleError::IllegalPayload(
                "action not permitted for this actor".into(),
            )),
        }
    }

    fn seat_action(&mut self, seat: Seat, action: &Action, fx: &mut Effects) -> Result<(), RuleError> {
        match action {
            Action::SubmitSelfExplanation { text } => {
                let round = self.round_mut();
                round.self_explanation = Some(text.clone());
                self.phase = TurnPhase::Voting;
                fx.push(Effect::CancelTimer {
                    timer: TimerKind::SelfExplain,
                });
                fx.push(Effect::Broadcast {
                    event: ServerEvent::SelfExplanationPosted {
                        seat,
                        text: text.clone(),
                    },
                });
                fx.push(Effect::ArmTimer {
                    timer: TimerKind::Vote,
                    seconds: self.config.vote_seconds,
                });
                fx.push(self.phase_changed());
                Ok(())
            }
            Action::CastVote { strategy } => {
                let ballot = if self.phase == TurnPhase::Voting {
                    Ballot::Vote
                } else {
                    Ballot::Revote
                };
                let eligible = self.non_readers().len();
                let round = self.round_mut();
                let votes = match ballot {
                    Ballot::Vote => &mut round.votes,
                    Ballot::Revote => &mut round.revotes,
                };
                votes.insert(seat, Some(*strategy));
                let cast = votes.len();
                fx.push(Effect::SendTo {
                    seat,
                    event: ServerEvent::VoteAccepted { ballot },
                });
                fx.push(Effect::Broadcast {
                    event: ServerEvent::VoteProgress {
                        ballot,
                        cast,
                        eligible,
                    },
                });
                if cast == eligible {
                    match ballot {
                        Ballot::Vote => self.close_vote(fx),
                        Ballot::Revote => self.close_revote(fx),
                    }
                }
                Ok(())
            }
            Action::Chat { text } => {
                let max = self.config.debate_max_messages;
                let used = self.round_mut().debate_messages_used.entry(seat).or_insert(0);
                *used += 1;
                let messages_remaining = max - *used;
                fx.push(Effect::Broadcast {
                    event: ServerEvent::ChatPosted {
                        seat,
                        text: text.clone(),
                        messages_remaining,
                    },
                });
                self.maybe_close_debate(fx);
                Ok(())
            }
            Action::PassDebate => {
                let max = self.config.debate_max_messages;
                self.round_mut().debate_messages_used.insert(seat, max);
                fx.push(Effect::Broadcast {
                    event: ServerEvent::ChatPassed { seat },
                });
                self.maybe_close_debate(fx);
                Ok(())
            }
            Action::Purchase { purchase } => self.apply_power(seat, *purchase, Payment::Preferred, fx),
            Action::PlayCard { card_id, target } => {
                let card = self
                    .players[seat.index()]
                    .hand
                    .iter()
                    .find(|c| &c.card_id == card_id)
                    .ok_or(RuleError::CardNotHeld)?;
                let kind = match (card.kind, target) {
                    (CardKind::PowerExtraTurn, _) => PurchaseKind::ExtraTurn,
                    (CardKind::PowerExtraCard, _) => PurchaseKind::ExtraCard,
                    (CardKind::PowerFreeze, Some(target)) => PurchaseKind::Freeze { target: *target },
                    (CardKind::PowerFreeze, None) => {
                        return Err(RuleError::IllegalPayload("freeze needs a target".into()))
                    }
                    (CardKind::Move { .. }, _) => return Err(RuleError::CardNotHeld),
                };
                self.apply_power(seat, kind, Payment::Card(card_id), fx)
            }
            Action::Advance | Action::TimerExpired { .. } | Action::SetConnected { .. } => Err(
                RuleError::IllegalPayload("host-only action sent by a player".into()),
            ),
        }
    }

    fn advance(&mut self, fx: &mut Effects) -> Result<(), RuleError> {
        match self.phase {
            TurnPhase::StrategyAssigned => {
                self.phase = TurnPhase::SelfExplaining;
                fx.push(Effect::ArmTimer {
                    timer: TimerKind::SelfExplain,
                    seconds: self.config.self_explain_seconds,
                });
                fx.push(self.phase_changed());
                let reader = self.reader().expect("round in progress");
                let reader_name = self.players[reader.index()].player_id.clone();
                for seat in self.non_readers() {
                    fx.push(Effect::SendTo {
                        seat,
                        event: ServerEvent::ReaderBusy {
                            reader_name: reader_name.clone(),
                        },
                    });
                }
                Ok(())
            }
            TurnPhase::Reveal => {
                let round = self.round.as_ref().expect("round in progress");
                if needs_debate(&round.votes, round.assigned_strategy) {
                    self.open_debate(fx);
                } else {
                    self.phase = TurnPhase::Resolving;
                    fx.push(self.phase_changed());
                }
                Ok(())
            }
            TurnPhase::Resolving => self.resolve(fx),
            TurnPhase::CardDraw => self.draw_event_card(fx).map(|_| ()),
            _ => Err(RuleError::WrongPhase),
        }
    }

    fn expire_timer(&mut self, timer: TimerKind, round: u32, fx: &mut Effects) -> Result<(), RuleError> {
        if round != self.round_number {
            return Err(RuleError::WrongPhase);
        }
        match (timer, self.phase) {
            (TimerKind::SelfExplain, TurnPhase::SelfExplaining) => {
                self.round_mut().forfeited = true;
                self.phase = TurnPhase::Resolving;
                fx.push(self.phase_changed());
                Ok(())
            }
            (TimerKind::Vote, TurnPhase::Voting) => {
                self.close_vote(fx);
                Ok(())
            }
            (TimerKind::Debate, TurnPhase::Debating) => {
                self.close_debate(fx);
                Ok(())
            }
            (TimerKind::Revote, TurnPhase::Revoting) => {
                self.close_revote(fx);
                Ok(())
            }
            _ => Err(RuleError::WrongPhase),
        }
    }

    fn close_vote(&mut self, fx: &mut Effects) {
        let non_readers = self.non_readers();
        let round = self.round_mut();
        for seat in non_readers {
            round.votes.entry(seat).or_insert(None);
        }
        let votes = round.votes.clone();
        let assigned = round.assigned_strategy;
        self.phase = TurnPhase::Reveal;
        fx.push(Effect::CancelTimer {
            timer: TimerKind::Vote,
        });
        fx.push(self.phase_changed());
        fx.push(Effect::Broadcast {
            event: ServerEvent::VotesRevealed { votes, assigned },
        });
    }

    fn open_debate(&mut self, fx: &mut Effects) {
        let max = self.config.debate_max_messages;
        let seats: Vec<Seat> = self.seats().collect();
        let round = self.round_mut();
        round.debate_messages_used = seats.iter().map(|s| (*s, 0)).collect();
        round.debate_open = true;
        round.debated = true;
        self.phase = TurnPhase::Debating;
        fx.push(Effect::ArmTimer {
            timer: TimerKind::Debate,
            seconds: self.config.debate_seconds,
        });
        fx.push(self.phase_changed());
        fx.push(Effect::Broadcast {
            event: ServerEvent::DebateStarted {
                seconds_remaining: self.config.debate_seconds,
                messages_remaining: seats.iter().map(|s| (*s, max)).collect(),
            },
        });
    }

    fn maybe_close_debate(&mut self, fx: &mut Effects) {
        let max = self.config.debate_max_messages;
        let round = self.round.as_ref().expect("round in progress");
        let all_done = self
            .non_readers()
            .iter()
            .all(|s| round.debate_messages_used.get(s).copied().unwrap_or(0) >= max);
        if all_done {
            self.close_debate(fx);
        }
    }

    fn close_debate(&mut self, fx: &mut Effects) {
        self.round_mut().debate_open = false;
        self.phase = TurnPhase::Revoting;
        fx.push(Effect::CancelTimer {
            timer: TimerKind::Debate,
        });
        fx.push(Effect::ArmTimer {
            timer: TimerKind::Revote,
            seconds: self.config.vote_seconds,
        });
        fx.push(self.phase_changed());
    }

    fn close_revote(&mut self, fx: &mut Effects) {
        let non_readers = self.non_readers();
        let round = self.round_mut();
        for seat in non_readers {
            round.revotes.entry(seat).or_insert(None);
        }
        self.phase = TurnPhase::Resolving;
        fx.push(Effect::CancelTimer {
            timer: TimerKind::Revote,
        });
        fx.push(self.phase_changed());
    }

    fn resolve(&mut self, fx: &mut Effects) -> Result<(), RuleError> {
        let round = self.round.as_ref().expect("round in progress");
        if round.forfeited {
            fx.push(Effect::Broadcast {
                event: ServerEvent::TurnResolved {
                    reader_seat: round.reader_seat,
                    forfeited: true,
                    outcome: None,
                    final_votes: None,
                    awards: BTreeMap::new(),
                    dice: None,
                    movement: None,
                },
            });
            return self.finish_round(fx);
        }
        let final_votes = round.final_votes().clone();
        let outcome = tally_votes(&final_votes, round.assigned_strategy);
        self.round_mut().outcome = Some(outcome);
        self.score_and_move(outcome, &final_votes, fx)
    }

    /// Awards points and moves the reader on a majority match (then the
    /// card draw follows); otherwise closes the round with no reward.
    pub fn score_and_move(
        &mut self,
        outcome: VoteOutcome,
        final_votes: &BTreeMap<Seat, Option<Strategy>>,
        fx: &mut Effects,
    ) -> Result<(), RuleError> {
        if self.phase != TurnPhase::Resolving {
            return Err(RuleError::WrongPhase);
        }
        let round = self.round.as_ref().expect("round in progress");
        let reader = round.reader_seat;
        let assigned = round.assigned_strategy;
        if !outcome.majority_matched {
            fx.push(Effect::Broadcast {
                event: ServerEvent::TurnResolved {
                    reader_seat: reader,
                    forfeited: false,
                    outcome: Some(outcome),
                    final_votes: Some(final_votes.clone()),
                    awards: BTreeMap::new(),
                    dice: None,
                    movement: None,
                },
            });
            return self.finish_round(fx);
        }

        let mut awards = BTreeMap::new();
        awards.insert(reader, self.config.points_reader_on_majority);
        for (seat, vote) in final_votes {
            if *vote == Some(assigned) {
                awards.insert(*seat, self.config.points_voter_on_match);
            }
        }
        for (seat, points) in &awards {
            self.player_mut(*seat).points += points;
        }
        let (d1, d2) = self.roll_dice();
        let movement = d1 + d2;
        self.player_mut(reader).board_position += movement;
        self.phase = TurnPhase::CardDraw;
        fx.push(Effect::Broadcast {
            event: ServerEvent::TurnResolved {
                reader_seat: reader,
                forfeited: false,
                outcome: Some(outcome),
                final_votes: Some(final_votes.clone()),
                awards,
                dice: Some([d1, d2]),
                movement: Some(movement),
            },
        });
        fx.push(self.broadcast_scoreboard());
        fx.push(self.phase_changed());
        Ok(())
    }

    /// Two independent draws from `1..=dice_faces`.
    pub fn roll_dice(&mut self) -> (u32, u32) {
        let faces = self.config.dice_faces;
        let d1 = self.rng.roll(faces);
        let d2 = self.rng.roll(faces);
        (d1, d2)
    }

    /// Draws the reader's event card and closes the round. Returns `None`
    /// when every card is held in hands.
    pub fn draw_event_card(&mut self, fx: &mut Effects) -> Result<Option<EventCard>, RuleError> {
        if self.phase != TurnPhase::CardDraw {
            return Err(RuleError::WrongPhase);
        }
        let reader = self.reader().expect("round in progress");
        let card = match self.draw_for(reader, fx) {
            Ok(card) => Some(card),
            Err(RuleError::DeckAndDiscardEmpty) => None,
            Err(e) => return Err(e),
        };
        self.finish_round(fx)?;
        Ok(card)
    }

    fn draw_for(&mut self, seat: Seat, fx: &mut Effects) -> Result<EventCard, RuleError> {
        if self.event_deck.is_empty() {
            if self.discard_pile.is_empty() {
                return Err(RuleError::DeckAndDiscardEmpty);
            }
            self.event_deck = std::mem::take(&mut self.discard_pile);
            self.rng.shuffle(&mut self.event_deck);
        }
        let card = self.event_deck.remove(0);
        match card.kind {
            CardKind::Move { delta } => {
                let player = self.player_mut(seat);
                player.board_position = (player.board_position as i64 + delta as i64).max(0) as u32;
                self.discard_pile.push(card.clone());
                fx.push(Effect::Broadcast {
                    event: ServerEvent::CardDrawn {
                        seat,
                        card: CardView::Revealed(card.clone()),
                    },
                });
            }
            _ => {
                self.player_mut(seat).hand.push(card.clone());
                for other in self.seats().collect::<Vec<_>>() {
                    let view = if other == seat {
                        CardView::Revealed(card.clone())
                    } else {
                        CardView::Hidden {
                            kind: HiddenKind::Hidden,
                        }
                    };
                    fx.push(Effect::SendTo {
                        seat: other,
                        event: ServerEvent::CardDrawn { seat, card: view },
                    });
                }
            }
        }
        fx.push(self.broadcast_scoreboard());
        Ok(card)
    }

    /// Spends points (or a held power card) on an in-game feature.
    pub fn purchase(&mut self, seat: Seat, kind: PurchaseKind, fx: &mut Effects) -> Result<(), RuleError> {
        validate_for_phase(&Action::Purchase { purchase: kind }, seat, self)?;
        self.apply_power(seat, kind, Payment::Preferred, fx)
    }

    fn apply_power(
        &mut self,
        seat: Seat,
        kind: PurchaseKind,
        payment: Payment<'_>,
        fx: &mut Effects,
    ) -> Result<(), RuleError> {
        match kind {
            PurchaseKind::ExtraTurn if self.pending_extra_turn_for.is_some() => {
                return Err(RuleError::IllegalPayload(
                    "an extra turn is already pending".into(),
                ))
            }
            PurchaseKind::Freeze { target } => {
                if target == seat {
                    return Err(RuleError::CannotFreezeSelf);
                }
                if target.index() >= self.players.len() {
                    return Err(RuleError::UnknownTarget);
                }
            }
            _ => {}
        }
        let plan = self.payment_plan(seat, kind, payment)?;
        if kind == PurchaseKind::ExtraCard
            && matches!(plan, Plan::Points(_))
            && self.event_deck.is_empty()
            && self.discard_pile.is_empty()
        {
            return Err(RuleError::DeckAndDiscardEmpty);
        }
        let paid_with = self.settle(seat, plan);
        let target = match kind {
            PurchaseKind::Freeze { target } => Some(target),
            _ => None,
        };
        fx.push(Effect::Broadcast {
            event: ServerEvent::PurchaseApplied {
                seat,
                kind: kind.into(),
                target,
                paid_with,
            },
        });
        match kind {
            PurchaseKind::ChangeStrategy => {
                let round = self.round.as_ref().expect("round in progress");
                let mut exclude = vec![round.assigned_strategy];
                exclude.extend(self.players[seat.index()].previous_assigned_strategy);
                let strategy = draw_strategy(&mut self.rng, &exclude);
                self.round_mut().assigned_strategy = strategy;
                fx.push(Effect::SendTo {
                    seat,
                    event: ServerEvent::StrategyAssigned { strategy },
                });
                fx.push(self.broadcast_scoreboard());
            }
            PurchaseKind::ExtraTurn => {
                self.pending_extra_turn_for = Some(seat);
                fx.push(self.broadcast_scoreboard());
            }
            PurchaseKind::Freeze { target } => {
                self.player_mut(target).frozen_turns += 1;
                fx.push(self.broadcast_scoreboard());
            }
            PurchaseKind::ExtraCard => {
                self.draw_for(seat, fx)?;
            }
        }
        Ok(())
    }

    fn payment_plan(&self, seat: Seat, kind: PurchaseKind, payment: Payment<'_>) -> Result<Plan, RuleError> {
        let player = &self.players[seat.index()];
        let card_kind = match kind {
            PurchaseKind::ChangeStrategy => None,
            PurchaseKind::ExtraTurn => Some(CardKind::PowerExtraTurn),
            PurchaseKind::Freeze { .. } => Some(CardKind::PowerFreeze),
            PurchaseKind::ExtraCard => Some(CardKind::PowerExtraCard),
        };
        match payment {
            Payment::Card(id) => player
                .hand
                .iter()
                .position(|c| c.card_id == id)
                .map(Plan::Card)
                .ok_or(RuleError::CardNotHeld),
            Payment::Preferred => {
                if let Some(idx) = card_kind.and_then(|k| player.hand.iter().position(|c| c.kind == k)) {
                    return Ok(Plan::Card(idx));
                }
                let cost = self.config.purchase_cost(kind);
                if player.points >= cost {
                    Ok(Plan::Points(cost))
                } else {
                    Err(RuleError::InsufficientPoints)
                }
            }
        }
    }

    fn settle(&mut self, seat: Seat, plan: Plan) -> PaidWith {
        match plan {
            Plan::Card(idx) => {
                let card = self.player_mut(seat).hand.remove(idx);
                self.discard_pile.push(card);
                PaidWith::Card
            }
            Plan::Points(cost) => {
                self.player_mut(seat).points -= cost;
                PaidWith::Points
            }
        }
    }

    fn finish_round(&mut self, fx: &mut Effects) -> Result<(), RuleError> {
        let round = self.round.as_ref().expect("round in progress");
        let (reader, assigned) = (round.reader_seat, round.assigned_strategy);
        self.player_mut(reader).previous_assigned_strategy = Some(assigned);
        self.advance_round(fx)
    }

    /// Rotates the reader (honouring a pending extra turn and skipping
    /// frozen seats) and starts the next round, or ends the game.
    pub fn advance_round(&mut self, fx: &mut Effects) -> Result<(), RuleError> {
        if !matches!(self.phase, TurnPhase::Resolving | TurnPhase::CardDraw) {
            return Err(RuleError::WrongPhase);
        }
        self.corpus.position += 1;
        self.round_number += 1;
        if self.corpus.current().is_none() || self.round_number > self.config.max_rounds {
            self.end_game(fx);
            return Ok(());
        }
        let (reader, is_extra_turn) = match self.pending_extra_turn_for.take() {
            Some(seat) => (seat, true),
            None => (self.next_rotation_reader(), false),
        };
        self.begin_round(reader, is_extra_turn);
        self.round_start_effects(fx);
        Ok(())
    }

    fn next_rotation_reader(&mut self) -> Seat {
        let n = self.players.len();
        let mut candidate = (self.rotation_seat.index() + 1) % n;
        while self.players[candidate].frozen_turns > 0 {
            self.players[candidate].frozen_turns -= 1;
            candidate = (candidate + 1) % n;
        }
        self.rotation_seat = Seat(candidate as u8);
        self.rotation_seat
    }

    fn end_game(&mut self, fx: &mut Effects) {
        self.phase = TurnPhase::GameOver;
        self.round = None;
        let standings = standings(self);
        fx.push(self.phase_changed());
        fx.push(Effect::Broadcast {
            event: ServerEvent::GameOver {
                standings: standings.clone(),
            },
        });
        fx.push(Effect::GameEnded { standings });
    }

    /// Redraws the reader's strategy, excluding their previous one. Only
    /// legal while the strategy is being assigned.
    pub fn assign_strategy(&mut self) -> Result<Strategy, RuleError> {
        if self.phase != TurnPhase::StrategyAssigned {
            return Err(RuleError::WrongPhase);
        }
        let reader = self.reader().expect("round in progress");
        let exclude: Vec<Strategy> = self.players[reader.index()]
            .previous_assigned_strategy
            .into_iter()
            .collect();
        let strategy = draw_strategy(&mut self.rng, &exclude);
        self.round_mut().assigned_strategy = strategy;
        Ok(strategy)
    }

    fn round_start_effects(&self, fx: &mut Effects) {
        let round = self.round.as_ref().expect("round in progress");
        let target = self.corpus.current().expect("round has a target");
        fx.push(Effect::Broadcast {
            event: ServerEvent::RoundStarted {
                round: self.round_number,
                reader_seat: round.reader_seat,
                reader_name: self.players[round.reader_seat.index()].player_id.clone(),
                sentence_index: target.sentence.index,
                sentence: target.sentence.text.clone(),
                context: target.context.iter().map(|s| s.text.clone()).collect(),
                is_extra_turn: round.is_extra_turn,
            },
        });
        fx.push(Effect::SendTo {
            seat: round.reader_seat,
            event: ServerEvent::StrategyAssigned {
                strategy: round.assigned_strategy,
            },
        });
        fx.push(self.broadcast_scoreboard());
        fx.push(self.phase_changed());
    }

    fn phase_changed(&self) -> Effect {
        Effect::Broadcast {
            event: ServerEvent::PhaseChanged {
                phase: self.phase,
                round: self.round_number,
                deadline_epoch_ms: None,
            },
        }
    }

    pub fn scoreboard(&self) -> ServerEvent {
        ServerEvent::Scoreboard {
            players: self
                .players
                .iter()
                .map(|p| ScoreLine {
                    seat: p.seat,
                    points: p.points,
                    board_position: p.board_position,
                    frozen_turns: p.frozen_turns,
                    hand_size: p.hand.len(),
                    connected: p.connected,
                })
                .collect(),
            pending_extra_turn_for: self.pending_extra_turn_for,
        }
    }

    fn broadcast_scoreboard(&self) -> Effect {
        Effect::Broadcast {
            event: self.scoreboard(),
        }
    }

    fn round_mut(&mut self) -> &mut super::state::RoundState {
        self.round.as_mut().expect("round in progress")
    }
}
