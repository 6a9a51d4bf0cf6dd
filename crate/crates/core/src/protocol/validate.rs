//! Phase and role legality of player actions.

use crate::error::RuleError;
use crate::event::{Action, PurchaseKind, Seat};
use crate::rules::{GameState, TurnPhase};

pub const CHAT_MAX_CHARS: usize = 500;
pub const SELF_EXPLANATION_MAX_CHARS: usize = 4000;

/// Checks that `seat` may perform `action` in the game's current phase and
/// role assignment. Affordability of purchases is checked by the reducer.
pub fn validate_for_phase(action: &Action, seat: Seat, game: &GameState) -> Result<(), RuleError> {
    if game.phase == TurnPhase::GameOver {
        return Err(RuleError::GameAlreadyOver);
    }
    if seat.index() >= game.players.len() {
        return Err(RuleError::UnknownSeat);
    }
    let phase = game.phase;
    let round = game.round.as_ref();
    let is_reader = round.is_some_and(|r| r.reader_seat == seat);

    match action {
        Action::SubmitSelfExplanation { text } => {
            if phase != TurnPhase::SelfExplaining {
                return Err(RuleError::WrongPhase);
            }
            if !is_reader {
                return Err(RuleError::NotYourTurn);
            }
            if text.trim().is_empty() {
                return Err(RuleError::IllegalPayload("self-explanation is empty".into()));
            }
            if text.chars().count() > SELF_EXPLANATION_MAX_CHARS {
                return Err(RuleError::IllegalPayload(format!(
                    "self-explanation exceeds {SELF_EXPLANATION_MAX_CHARS} characters"
                )));
            }
            Ok(())
        }
        Action::CastVote { .. } => {
            let ballot = match (phase, round) {
                (TurnPhase::Voting, Some(r)) => &r.votes,
                (TurnPhase::Revoting, Some(r)) => &r.revotes,
                _ => return Err(RuleError::WrongPhase),
            };
            if is_reader {
                return Err(RuleError::NotYourTurn);
            }
            if ballot.contains_key(&seat) {
                return Err(RuleError::AlreadyVoted);
            }
            Ok(())
        }
        Action::Chat { text } => {
            debate_slot(game, seat)?;
            let len = text.chars().count();
            if text.trim().is_empty() || len > CHAT_MAX_CHARS {
                return Err(RuleError::IllegalPayload(format!(
                    "chat text must be 1..={CHAT_MAX_CHARS} characters"
                )));
            }
            Ok(())
        }
        Action::PassDebate => debate_slot(game, seat),
        Action::Purchase {
            purchase: PurchaseKind::ChangeStrategy,
        } => {
            if !matches!(phase, TurnPhase::StrategyAssigned | TurnPhase::SelfExplaining) {
                return Err(RuleError::WrongPhase);
            }
            if !is_reader {
                return Err(RuleError::NotYourTurn);
            }
            Ok(())
        }
        Action::Purchase { .. } | Action::PlayCard { .. } => {
            if phase == TurnPhase::Lobby {
                return Err(RuleError::WrongPhase);
            }
            Ok(())
        }
        Action::Advance | Action::TimerExpired { .. } | Action::SetConnected { .. } => Err(
            RuleError::IllegalPayload("host-only action sent by a player".into()),
        ),
    }
}

fn debate_slot(game: &GameState, seat: Seat) -> Result<(), RuleError> {
    let round = match (game.phase, game.round.as_ref()) {
        (TurnPhase::Debating, Some(r)) if r.debate_open => r,
        _ => return Err(RuleError::ChatClosed),
    };
    let used = round.debate_messages_used.get(&seat).copied().unwrap_or(0);
    if used >= game.config.debate_max_messages {
        return Err(RuleError::ChatLimitReached);
    }
    Ok(())
}
