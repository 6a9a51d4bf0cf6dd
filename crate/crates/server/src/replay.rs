//! Re-running a log against the reducer, and auditing it on the way.

use std::collections::BTreeMap;
use std::sync::Arc;

use miboard_core::canonical::canonical_hash;
use miboard_core::protocol::ServerEvent;
use miboard_core::rules::invariants::{state_violations, step_violations};
use miboard_core::rules::{standings, Standing};
use miboard_core::{Action, Effect, GameEvent, GameState, SetupError, TextCorpus, TurnPhase};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log::ParsedLog;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("log needs corpus {expected}, got {found}")]
    CorpusMismatch { expected: String, found: String },
    #[error("corrupt log: expected seq {expected}, found {found}")]
    CorruptLog { expected: u64, found: u64 },
    #[error("replay diverged at seq {seq}: {reason}")]
    DivergentReplay { seq: u64, reason: String },
    #[error("log header does not describe a valid game: {0}")]
    BadHeader(#[from] SetupError),
}

impl ReplayError {
    pub fn code(&self) -> &'static str {
        match self {
            ReplayError::CorpusMismatch { .. } => "CorpusMismatch",
            ReplayError::CorruptLog { .. } => "CorruptLog",
            ReplayError::DivergentReplay { .. } => "DivergentReplay",
            ReplayError::BadHeader(_) => "BadHeader",
        }
    }
}

/// One replayed step, handed to observers.
pub struct Step<'a> {
    pub seq: u64,
    pub event: &'a GameEvent,
    pub before: &'a GameState,
    pub after: &'a GameState,
    pub effects: &'a [Effect],
}

/// Rebuilds the initial state a log header describes.
pub fn initial_state(log: &ParsedLog, corpus: Arc<TextCorpus>) -> Result<GameState, ReplayError> {
    let h = &log.header;
    if corpus.checksum() != h.corpus_checksum {
        return Err(ReplayError::CorpusMismatch {
            expected: h.corpus_checksum.clone(),
            found: corpus.checksum().to_string(),
        });
    }
    let state = GameState::new_game(h.config.clone(), &h.player_ids, corpus, h.seed)?;
    let hash = canonical_hash(&state);
    if hash != h.initial_hash {
        return Err(ReplayError::DivergentReplay {
            seq: 0,
            reason: format!("initial hash {hash} != {}", h.initial_hash),
        });
    }
    Ok(state)
}

/// Replays every record, checking sequence numbers and state hashes, and
/// calls `observe` after each step.
pub fn replay_with(
    log: &ParsedLog,
    corpus: Arc<TextCorpus>,
    mut observe: impl FnMut(Step<'_>),
) -> Result<GameState, ReplayError> {
    let mut state = initial_state(log, corpus)?;
    for (i, record) in log.records.iter().enumerate() {
        let expected = i as u64 + 1;
        if record.seq != expected {
            return Err(ReplayError::CorruptLog {
                expected,
                found: record.seq,
            });
        }
        let event = record.event();
        let (next, effects) =
            state
                .apply_event(&event)
                .map_err(|e| ReplayError::DivergentReplay {
                    seq: record.seq,
                    reason: format!("event rejected: {e}"),
                })?;
        let hash = canonical_hash(&next);
        if hash != record.state_hash {
            return Err(ReplayError::DivergentReplay {
                seq: record.seq,
                reason: format!("hash {hash} != recorded {}", record.state_hash),
            });
        }
        observe(Step {
            seq: record.seq,
            event: &event,
            before: &state,
            after: &next,
            effects: &effects,
        });
        state = next;
    }
    Ok(state)
}

pub fn replay(log: &ParsedLog, corpus: Arc<TextCorpus>) -> Result<GameState, ReplayError> {
    replay_with(log, corpus, |_| {})
}

pub const STATS_VERSION: u32 = 1;

/// Pacing statistics for one game.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameStats {
    pub v: u32,
    pub events: u64,
    pub rounds: u32,
    pub extra_turns: u32,
    pub forfeits: u32,
    pub majority_matches: u32,
    pub debates: u32,
    pub chat_messages: u32,
    pub passes: u32,
    pub purchases: BTreeMap<String, u32>,
    pub cards_played: u32,
    pub cards_drawn: u32,
    pub timer_expiries: BTreeMap<String, u32>,
    pub game_over: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub stats: GameStats,
    pub standings: Vec<Standing>,
    pub final_hash: String,
    /// Invariant violations, as `seq: description`.
    pub violations: Vec<String>,
}

/// Replays a log and checks every rules invariant at every step.
pub fn audit(log: &ParsedLog, corpus: Arc<TextCorpus>) -> Result<AuditReport, ReplayError> {
    let mut stats = GameStats {
        v: STATS_VERSION,
        ..GameStats::default()
    };
    let mut violations = Vec::new();
    let initial = initial_state(log, corpus.clone())?;
    violations.extend(state_violations(&initial).into_iter().map(|v| format!("0: {v}")));
    let state = replay_with(log, corpus, |step| {
        stats.events += 1;
        for v in state_violations(step.after)
            .into_iter()
            .chain(step_violations(step.before, step.after))
        {
            violations.push(format!("{}: {v}", step.seq));
        }
        match &step.event.action {
            Action::Chat { .. } => stats.chat_messages += 1,
            Action::PassDebate => stats.passes += 1,
            Action::Purchase { purchase } => {
                *stats.purchases.entry(purchase.name().to_string()).or_default() += 1
            }
            Action::PlayCard { .. } => stats.cards_played += 1,
            Action::TimerExpired { timer, .. } => {
                let name = serde_json::to_value(timer).expect("timer serializes");
                let name = name.as_str().unwrap_or_default().to_string();
                *stats.timer_expiries.entry(name).or_default() += 1
            }
            _ => {}
        }
        if step.after.phase == TurnPhase::Debating && step.before.phase != TurnPhase::Debating {
            stats.debates += 1;
        }
        for effect in step.effects {
            match effect {
                Effect::Broadcast { event: ServerEvent::RoundStarted { is_extra_turn, .. } } => {
                    stats.rounds += 1;
                    if *is_extra_turn {
                        stats.extra_turns += 1;
                    }
                }
                Effect::Broadcast {
                    event: ServerEvent::TurnResolved { forfeited, outcome, .. },
                } => {
                    if *forfeited {
                        stats.forfeits += 1;
                    }
                    if outcome.is_some_and(|o| o.majority_matched) {
                        stats.majority_matches += 1;
                    }
                }
                Effect::Broadcast { event: ServerEvent::CardDrawn { .. } } => stats.cards_drawn += 1,
                Effect::SendTo {
                    seat: to,
                    event: ServerEvent::CardDrawn { seat, .. },
                } if seat == to => stats.cards_drawn += 1,
                _ => {}
            }
        }
    })?;
    // The opening round is announced before the first record.
    stats.rounds += 1;
    stats.game_over = state.is_over();
    Ok(AuditReport {
        stats,
        standings: standings(&state),
        final_hash: canonical_hash(&state),
        violations,
    })
}
