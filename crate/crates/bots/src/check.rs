//! Post-hoc checks over what bots saw and what the server logged.

use std::collections::BTreeMap;
use std::sync::Arc;

use miboard_core::protocol::{Frame, ServerEvent, ServerFrame};
use miboard_core::{Action, Actor, Seat, Strategy, TextCorpus, TurnPhase};
use miboard_server::log::ParsedLog;
use miboard_server::replay::{initial_state, replay_with, ReplayError};
use serde_json::Value;

fn is_strategy_name(s: &str) -> bool {
    Strategy::ALL.iter().any(|st| st.as_str() == s)
}

/// Strategy names anywhere in `value`, skipping free-text fields.
fn strategy_names(value: &Value, found: &mut Vec<String>) {
    match value {
        Value::String(s) if is_strategy_name(s) => found.push(s.clone()),
        Value::Array(items) => items.iter().for_each(|v| strategy_names(v, found)),
        Value::Object(map) => {
            for (k, v) in map {
                if k != "text" {
                    strategy_names(v, found);
                }
            }
        }
        _ => {}
    }
}

/// Frames a seat received during a secret first ballot that name a
/// strategy it must not know: for a non-reader any strategy at all, for
/// the reader any strategy other than its own assignment.
pub fn secrecy_violations(seat: Seat, frames: &[ServerFrame]) -> Vec<String> {
    let mut reader = None;
    let mut assigned: Option<Strategy> = None;
    let mut secret = false;
    let mut out = Vec::new();
    for frame in frames {
        match &frame.event {
            ServerEvent::RoundStarted { reader_seat, .. } => {
                reader = Some(*reader_seat);
                assigned = None;
            }
            ServerEvent::StrategyAssigned { strategy } => assigned = Some(*strategy),
            ServerEvent::RoomState { snapshot } => {
                reader = snapshot.reader_seat;
                assigned = snapshot.assigned_strategy;
                secret = snapshot.phase == TurnPhase::Voting;
            }
            ServerEvent::PhaseChanged { phase, .. } => {
                secret = *phase == TurnPhase::Voting;
                continue;
            }
            _ => {}
        }
        if !secret {
            continue;
        }
        let value = serde_json::to_value(&frame.event).expect("events serialize");
        let mut names = Vec::new();
        strategy_names(&value, &mut names);
        let is_reader = reader == Some(seat);
        for name in names {
            let allowed = is_reader && assigned.is_some_and(|a| a.as_str() == name);
            if !allowed {
                out.push(format!("seat {seat} frame {}: `{name}` in {}", frame.seq, frame.encode()));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DebateReport {
    pub debates: usize,
    pub violations: Vec<String>,
}

/// Replays a log and checks every debate against its caps: at most
/// `debate_max_messages` chats per seat, and closed within
/// `limit_ms` of logged time after it opened.
pub fn debate_violations(
    log: &ParsedLog,
    corpus: Arc<TextCorpus>,
    limit_ms: u64,
) -> Result<DebateReport, ReplayError> {
    let clock: BTreeMap<u64, u64> = log.records.iter().map(|r| (r.seq, r.wall_clock_ms)).collect();
    let max = log.header.config.debate_max_messages;
    let mut report = DebateReport::default();
    let mut open: Option<(u64, BTreeMap<Seat, u32>)> = None;
    replay_with(log, corpus, |step| {
        let at = clock.get(&step.seq).copied().unwrap_or(0);
        let was = step.before.phase == TurnPhase::Debating;
        let is = step.after.phase == TurnPhase::Debating;
        if is && !was {
            report.debates += 1;
            open = Some((at, BTreeMap::new()));
        }
        if let (Some((_, counts)), Action::Chat { .. }, Actor::Seat(seat)) =
            (open.as_mut(), &step.event.action, step.event.actor)
        {
            let n = counts.entry(seat).or_default();
            *n += 1;
            if *n > max {
                report
                    .violations
                    .push(format!("seq {}: seat {seat} posted message {n}", step.seq));
            }
        }
        if was && !is {
            if let Some((start, _)) = open.take() {
                if at - start > limit_ms {
                    report.violations.push(format!(
                        "seq {}: debate lasted {} ms",
                        step.seq,
                        at - start
                    ));
                }
            }
        }
    })?;
    if open.is_some() {
        report.violations.push("debate never closed".into());
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RepetitionReport {
    /// Rounds whose reader had read before.
    pub rounds_checked: usize,
    pub violations: Vec<String>,
}

fn check_round(round: u32, reader: Seat, assigned: Strategy, last: &BTreeMap<Seat, Strategy>, report: &mut RepetitionReport) {
    if let Some(prev) = last.get(&reader) {
        report.rounds_checked += 1;
        if *prev == assigned {
            report
                .violations
                .push(format!("round {round}: seat {reader} assigned {assigned} twice in a row"));
        }
    }
}

/// Replays a log and checks that no reader is assigned the strategy they
/// ended their previous reading turn with.
pub fn repetition_violations(log: &ParsedLog, corpus: Arc<TextCorpus>) -> Result<RepetitionReport, ReplayError> {
    let mut report = RepetitionReport::default();
    let mut last: BTreeMap<Seat, Strategy> = BTreeMap::new();
    let initial = initial_state(log, corpus.clone())?;
    // (round number, reader, latest assignment) of the round in progress.
    let mut current = initial
        .round
        .as_ref()
        .map(|r| (initial.round_number, r.reader_seat, r.assigned_strategy));
    replay_with(log, corpus, |step| {
        let after = step.after;
        let next = after.round.as_ref().map(|r| (after.round_number, r.reader_seat, r.assigned_strategy));
        match (current, next) {
            (Some((n, reader, assigned)), Some((m, _, _))) if m != n => {
                last.insert(reader, assigned);
            }
            (Some((_, reader, assigned)), None) => {
                last.insert(reader, assigned);
            }
            _ => {}
        }
        if let Some((m, reader, assigned)) = next {
            if current.map(|c| c.0) != Some(m) {
                check_round(m, reader, assigned, &last, &mut report);
            }
        }
        current = next;
    })?;
    Ok(report)
}
