//! Scripted players.

use std::fmt;
use std::str::FromStr;

use miboard_core::protocol::messages::PurchaseTag;
use miboard_core::protocol::{ClientCommand, ClientFrame};
use miboard_core::{Seat, Strategy, TurnPhase};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::view::ClientView;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BotPolicy {
    /// Uniform votes, random debate moves and occasional affordable purchases.
    Random { seed: u64 },
    /// Votes the strategy tagged in the self-explanation and never argues.
    Honest,
    /// Writes honest self-explanations but always votes against its belief.
    Contrarian,
    /// Acts like [`BotPolicy::Honest`] once a phase is `delay_ms` old;
    /// `None` never acts after the lobby.
    Stall { delay_ms: Option<u64> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy `{0}` (expected honest, contrarian, random:SEED, stall or stall:MS)")]
pub struct UnknownPolicy(pub String);

impl FromStr for BotPolicy {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UnknownPolicy(s.to_string());
        let (name, arg) = match s.trim().split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.trim(), None),
        };
        match (name.to_ascii_lowercase().as_str(), arg) {
            ("honest", None) => Ok(BotPolicy::Honest),
            ("contrarian", None) => Ok(BotPolicy::Contrarian),
            ("random", None) => Ok(BotPolicy::Random { seed: 0 }),
            ("random", Some(a)) => Ok(BotPolicy::Random {
                seed: a.parse().map_err(|_| bad())?,
            }),
            ("stall", None) => Ok(BotPolicy::Stall { delay_ms: None }),
            ("stall", Some(a)) => Ok(BotPolicy::Stall {
                delay_ms: Some(a.parse().map_err(|_| bad())?),
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for BotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BotPolicy::Random { seed } => write!(f, "random:{seed}"),
            BotPolicy::Honest => f.write_str("honest"),
            BotPolicy::Contrarian => f.write_str("contrarian"),
            BotPolicy::Stall { delay_ms: None } => f.write_str("stall"),
            BotPolicy::Stall { delay_ms: Some(ms) } => write!(f, "stall:{ms}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Act(ClientCommand),
    /// Nothing to do before this local time.
    WaitUntil(u64),
    Idle,
}

/// A self-explanation whose first word is the strategy tag in brackets.
pub fn canned_self_explanation(strategy: Strategy, sentence_index: usize) -> String {
    let body = match strategy {
        Strategy::ComprehensionMonitoring => "I am not sure I follow this part, so I reread it slowly.",
        Strategy::Paraphrasing => "In other words, the sentence restates the idea in simpler terms.",
        Strategy::Prediction => "Next the text will probably explain what this leads to.",
        Strategy::Elaboration => "This reminds me of something I already know about the topic.",
        Strategy::Bridging => "This connects back to what the previous sentence said.",
    };
    format!("[{}] {body} (sentence {sentence_index})", strategy.as_str())
}

/// Reads the bracketed tag off a self-explanation.
pub fn strategy_tag(text: &str) -> Option<Strategy> {
    let rest = text.trim_start().strip_prefix('[')?;
    let (tag, _) = rest.split_once(']')?;
    tag.parse().ok()
}

/// The strategy after `s` in the fixed cycle.
pub fn next_strategy(s: Strategy) -> Strategy {
    let i = Strategy::ALL.iter().position(|x| *x == s).unwrap_or(0);
    Strategy::ALL[(i + 1) % Strategy::ALL.len()]
}

const CONTRARIAN_LINES: [&str; 3] = [
    "I read it differently.",
    "The wording points somewhere else to me.",
    "I will stick with my vote.",
];

/// A policy plus the view it decides from.
#[derive(Debug, Clone)]
pub struct Bot {
    pub policy: BotPolicy,
    pub name: String,
    pub view: ClientView,
    next_seq: u64,
}

impl Bot {
    pub fn new(policy: BotPolicy, name: impl Into<String>) -> Self {
        Bot {
            policy,
            name: name.into(),
            view: ClientView::default(),
            next_seq: 1,
        }
    }

    /// Frames a command, numbering it and noting it in the view.
    pub fn frame(&mut self, command: ClientCommand) -> ClientFrame {
        let seq = self.next_seq;
        self.next_seq += 1;
        if matches!(command, ClientCommand::Purchase { .. } | ClientCommand::PlayCard { .. }) {
            self.view.purchased_in = Some((self.view.round, self.view.phase));
        }
        self.view.awaiting_ack = Some(seq);
        ClientFrame { seq, command }
    }

    pub fn decide(&self, now_ms: u64) -> Decision {
        decide(self.policy, &self.view, now_ms)
    }
}

pub fn decide(policy: BotPolicy, view: &ClientView, now_ms: u64) -> Decision {
    let Some(me) = view.seat else {
        return Decision::Idle;
    };
    if view.awaiting_ack.is_some() {
        return Decision::Idle;
    }
    if view.phase == TurnPhase::Lobby {
        let ready = view.lobby.iter().any(|p| p.seat == me && p.ready);
        return if ready || view.lobby.is_empty() {
            Decision::Idle
        } else {
            Decision::Act(ClientCommand::Ready)
        };
    }
    if view.is_over() {
        return Decision::Idle;
    }
    match policy {
        BotPolicy::Honest => honest(view, false),
        BotPolicy::Contrarian => honest(view, true),
        BotPolicy::Stall { delay_ms: None } => Decision::Idle,
        BotPolicy::Stall { delay_ms: Some(delay) } => {
            let due = view.phase_since_ms.saturating_add(delay);
            if now_ms < due {
                match honest(view, false) {
                    Decision::Act(_) => Decision::WaitUntil(due),
                    other => other,
                }
            } else {
                honest(view, false)
            }
        }
        BotPolicy::Random { seed } => random(seed, me, view),
    }
}

fn belief(view: &ClientView) -> Strategy {
    view.self_explanation
        .as_deref()
        .and_then(strategy_tag)
        .unwrap_or(Strategy::ALL[0])
}

fn honest(view: &ClientView, contrarian: bool) -> Decision {
    let reader = view.is_reader();
    match view.phase {
        TurnPhase::SelfExplaining if reader => match view.assigned {
            Some(s) => Decision::Act(ClientCommand::SubmitSelfExplanation {
                text: canned_self_explanation(s, view.sentence_index.unwrap_or(0)),
            }),
            None => Decision::Idle,
        },
        TurnPhase::Voting | TurnPhase::Revoting if !reader && !view.voted => {
            let b = belief(view);
            let strategy = if contrarian { next_strategy(b) } else { b };
            Decision::Act(ClientCommand::CastVote { strategy })
        }
        TurnPhase::Debating if !reader => {
            let left = view.my_messages_remaining();
            if left == 0 {
                Decision::Idle
            } else if contrarian {
                let used = (view.config.debate_max_messages - left) as usize;
                Decision::Act(ClientCommand::Chat {
                    text: CONTRARIAN_LINES[used % CONTRARIAN_LINES.len()].to_string(),
                })
            } else {
                Decision::Act(ClientCommand::Pass)
            }
        }
        _ => Decision::Idle,
    }
}

fn phase_code(phase: TurnPhase) -> u64 {
    phase as u64
}

/// A generator that depends only on the seed and where the game is, so a
/// decision is the same however often it is asked for.
fn rng_for(seed: u64, seat: Seat, view: &ClientView, purpose: u64) -> StdRng {
    let key = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (u64::from(seat.0) << 56)
        ^ (u64::from(view.round) << 24)
        ^ (phase_code(view.phase) << 16)
        ^ purpose;
    StdRng::seed_from_u64(key)
}

fn random(seed: u64, me: Seat, view: &ClientView) -> Decision {
    if let Some(cmd) = random_purchase(seed, me, view) {
        return Decision::Act(cmd);
    }
    let reader = view.is_reader();
    match view.phase {
        TurnPhase::SelfExplaining if reader => honest(view, false),
        TurnPhase::Voting | TurnPhase::Revoting if !reader && !view.voted => {
            let salt = if view.phase == TurnPhase::Voting { 1 } else { 2 };
            let mut rng = rng_for(seed, me, view, salt);
            let strategy = Strategy::ALL[rng.random_range(0..Strategy::ALL.len())];
            Decision::Act(ClientCommand::CastVote { strategy })
        }
        TurnPhase::Debating if view.my_messages_remaining() > 0 && !reader => {
            let left = u64::from(view.my_messages_remaining());
            let mut rng = rng_for(seed, me, view, 10 + left);
            if rng.random_bool(0.5) {
                Decision::Act(ClientCommand::Chat {
                    text: format!("Point number {}.", 4 - left),
                })
            } else {
                Decision::Act(ClientCommand::Pass)
            }
        }
        _ => Decision::Idle,
    }
}

/// At most one attempt per round and phase, a quarter of the time, and only
/// for purchases the view says will succeed.
fn random_purchase(seed: u64, me: Seat, view: &ClientView) -> Option<ClientCommand> {
    if view.phase.is_transient() || view.purchased_in == Some((view.round, view.phase)) {
        return None;
    }
    let mut rng = rng_for(seed, me, view, 100);
    if !rng.random_bool(0.25) {
        return None;
    }
    let config = &view.config;
    let points = view.my_points();
    let holds = |kind| view.hand.iter().any(|c| c.kind == kind);
    use miboard_core::CardKind::{PowerExtraCard, PowerExtraTurn, PowerFreeze};
    let mut options = Vec::new();
    if view.is_reader() && view.phase == TurnPhase::SelfExplaining && points >= config.cost_change_strategy {
        options.push((PurchaseTag::ChangeStrategy, None));
    }
    if view.pending_extra_turn_for.is_none() && (holds(PowerExtraTurn) || points >= config.cost_extra_turn) {
        options.push((PurchaseTag::ExtraTurn, None));
    }
    if holds(PowerFreeze) || points >= config.cost_freeze {
        let others: Vec<Seat> = view.players.iter().map(|p| p.seat).filter(|s| *s != me).collect();
        if !others.is_empty() {
            let target = others[rng.random_range(0..others.len())];
            options.push((PurchaseTag::Freeze, Some(target)));
        }
    }
    if holds(PowerExtraCard) || (points >= config.cost_extra_card && view.cards_in_circulation() > 0) {
        options.push((PurchaseTag::ExtraCard, None));
    }
    if options.is_empty() {
        return None;
    }
    let (kind, target) = options[rng.random_range(0..options.len())];
    Some(ClientCommand::Purchase { kind, target })
}
