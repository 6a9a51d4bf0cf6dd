#![allow(dead_code)]

use std::sync::Arc;

use miboard_core::corpus::Sentence;
use miboard_core::{Action, Effect, GameConfig, GameEvent, GameState, Seat, TextCorpus};

/// A corpus with `targets` target sentences, each preceded by one context
/// sentence.
pub fn corpus(targets: usize) -> Arc<TextCorpus> {
    let mut sentences = Vec::new();
    for t in 0..targets {
        for is_target in [false, true] {
            let index = sentences.len();
            sentences.push(Sentence {
                index,
                text: format!("Sentence {index} (target group {t})."),
                is_target,
            });
        }
    }
    Arc::new(TextCorpus::new("Fixture", sentences).unwrap())
}

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

pub fn game(players: usize, targets: usize, seed: u64) -> GameState {
    GameState::new_game(GameConfig::default(), &ids(players), corpus(targets), seed).unwrap()
}

/// Applies `event`, then every host `Advance` the game asks for, and
/// returns the final state with all effects.
pub fn drive(state: &GameState, event: GameEvent) -> (GameState, Vec<Effect>) {
    let (mut state, mut effects) = state.apply_event(&event).expect("event accepted");
    while let Some(action) = state.pending_system_action() {
        let (next, fx) = state.apply_event(&GameEvent::system(action)).unwrap();
        state = next;
        effects.extend(fx);
    }
    (state, effects)
}

pub fn advance(state: &GameState) -> (GameState, Vec<Effect>) {
    state
        .apply_event(&GameEvent::system(Action::Advance))
        .expect("advance accepted")
}

pub fn seat(state: &GameState, s: u8, action: Action) -> (GameState, Vec<Effect>) {
    state
        .apply_event(&GameEvent::seat(Seat(s), action))
        .expect("seat action accepted")
}
