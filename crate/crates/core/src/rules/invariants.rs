//! Checks that hold for every reachable state and every accepted step.
//! Used by the test suites and by the log auditor.

use std::collections::BTreeMap;

use crate::config::EventCard;

use super::state::{GameState, TurnPhase};
use super::tally::needs_debate;

/// The phase edges an accepted event may take (staying put is always
/// allowed).
pub fn is_legal_edge(from: TurnPhase, to: TurnPhase) -> bool {
    use TurnPhase::*;
    from == to
        || to == GameOver
        || matches!(
            (from, to),
            (Lobby, StrategyAssigned)
                | (StrategyAssigned, SelfExplaining)
                | (SelfExplaining, Voting)
                | (SelfExplaining, Resolving)
                | (Voting, Reveal)
                | (Reveal, Resolving)
                | (Reveal, Debating)
                | (Debating, Revoting)
                | (Revoting, Resolving)
                | (Resolving, CardDraw)
                | (Resolving, StrategyAssigned)
                | (CardDraw, StrategyAssigned)
        )
}

fn card_multiset<'a>(cards: impl Iterator<Item = &'a EventCard>) -> BTreeMap<&'a EventCard, usize> {
    let mut counts = BTreeMap::new();
    for card in cards {
        *counts.entry(card).or_insert(0) += 1;
    }
    counts
}

/// Violations of the state invariants, empty when the state is sound.
pub fn state_violations(state: &GameState) -> Vec<String> {
    let mut out = Vec::new();
    if !(3..=4).contains(&state.players.len()) {
        out.push(format!("player count {}", state.players.len()));
    }

    let configured = state.config.build_deck();
    let held = state
        .event_deck
        .iter()
        .chain(&state.discard_pile)
        .chain(state.players.iter().flat_map(|p| &p.hand));
    if card_multiset(held) != card_multiset(configured.iter()) {
        out.push("card multiset not conserved".into());
    }
    for p in &state.players {
        if p.hand.iter().any(|c| !c.kind.is_power()) {
            out.push(format!("{} holds a move card", p.player_id));
        }
    }

    match (&state.round, state.phase) {
        (None, TurnPhase::GameOver) => {}
        (None, phase) => out.push(format!("no round in phase {phase:?}")),
        (Some(round), _) => {
            if round.votes.contains_key(&round.reader_seat)
                || round.revotes.contains_key(&round.reader_seat)
            {
                out.push("reader appears in a ballot".into());
            }
            if round
                .debate_messages_used
                .values()
                .any(|used| *used > state.config.debate_max_messages)
            {
                out.push("debate message cap exceeded".into());
            }
            let reader = &state.players[round.reader_seat.index()];
            if reader.previous_assigned_strategy == Some(round.assigned_strategy) {
                out.push(format!(
                    "{} assigned {} twice in a row",
                    reader.player_id, round.assigned_strategy
                ));
            }
        }
    }

    if state.phase == TurnPhase::GameOver
        && state.corpus.current().is_some()
        && state.round_number <= state.config.max_rounds
    {
        out.push("game over with targets and rounds remaining".into());
    }
    out
}

/// Violations of the step invariants between two consecutive accepted
/// states.
pub fn step_violations(before: &GameState, after: &GameState) -> Vec<String> {
    let mut out = Vec::new();
    if !is_legal_edge(before.phase, after.phase) {
        out.push(format!("illegal edge {:?} -> {:?}", before.phase, after.phase));
    }
    if before.phase == TurnPhase::Reveal && after.phase != TurnPhase::Reveal {
        let round = before.round.as_ref().expect("reveal has a round");
        let debate = needs_debate(&round.votes, round.assigned_strategy);
        if debate != (after.phase == TurnPhase::Debating) {
            out.push("debate gating disagrees with needs_debate".into());
        }
    }
    // Points move only through rewards on resolution and purchase costs.
    for (b, a) in before.players.iter().zip(&after.players) {
        if a.points > b.points && before.phase != TurnPhase::Resolving {
            out.push(format!("{} gained points outside resolution", a.player_id));
        }
    }
    out
}
