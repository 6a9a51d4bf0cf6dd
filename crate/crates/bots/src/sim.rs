//! In-process games: bots drive a [`RoomCore`] directly on a virtual clock.

use std::sync::Arc;

use miboard_core::protocol::{ClientCommand, ServerEvent, ServerFrame};
use miboard_core::rules::Standing;
use miboard_core::{GameConfig, Seat, TextCorpus};
use miboard_server::log::ParsedLog;
use miboard_server::replay::{audit, GameStats, ReplayError};
use miboard_server::room::{Delivery, RoomCore, RoomError, RoomOptions, MAX_SEATS, MIN_SEATS};

use crate::policy::{BotPolicy, Bot, Decision};

/// Stops a simulation that keeps acting without finishing.
pub const MAX_STEPS: usize = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("a game needs {MIN_SEATS} to {MAX_SEATS} bots, got {0}")]
    PlayerCount(usize),
    #[error(transparent)]
    Room(#[from] RoomError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("no bot can act and no timer is armed (phase {phase:?})")]
    Stuck { phase: miboard_core::TurnPhase },
    #[error("game did not finish within {0} steps")]
    TooManySteps(usize),
}

/// A command the server refused.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Rejection {
    pub seat: Seat,
    pub command: String,
    pub code: String,
}

#[derive(Debug, Clone)]
pub struct Transcript {
    pub log: ParsedLog,
    pub standings: Vec<Standing>,
    pub stats: GameStats,
    pub final_hash: String,
    /// Post-hoc audit findings; empty for a sound game.
    pub violations: Vec<String>,
    /// Every frame each seat received, in order.
    pub frames: Vec<Vec<ServerFrame>>,
    pub rejections: Vec<Rejection>,
    /// Virtual time at the end of the game.
    pub clock_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Acted(Seat),
    /// The clock moved forward to this time.
    Waited(u64),
    Finished,
}

pub fn bot_name(seat: usize) -> String {
    format!("bot{seat}")
}

#[derive(Debug)]
pub struct Sim {
    room: RoomCore,
    bots: Vec<Bot>,
    frames: Vec<Vec<ServerFrame>>,
    rejections: Vec<Rejection>,
    now: u64,
    steps: usize,
}

impl Sim {
    pub fn new(
        policies: &[BotPolicy],
        config: GameConfig,
        corpus: Arc<TextCorpus>,
        seed: u64,
    ) -> Result<Self, SimError> {
        Self::with_options(policies, config, corpus, seed, RoomOptions::in_memory())
    }

    pub fn with_options(
        policies: &[BotPolicy],
        config: GameConfig,
        corpus: Arc<TextCorpus>,
        seed: u64,
        options: RoomOptions,
    ) -> Result<Self, SimError> {
        if !(MIN_SEATS..=MAX_SEATS).contains(&policies.len()) {
            return Err(SimError::PlayerCount(policies.len()));
        }
        let room = RoomCore::new("SIMRUN", config, corpus, seed, options)?;
        let mut sim = Sim {
            room,
            bots: Vec::new(),
            frames: vec![Vec::new(); policies.len()],
            rejections: Vec::new(),
            now: 0,
            steps: 0,
        };
        for (i, policy) in policies.iter().enumerate() {
            sim.bots.push(Bot::new(*policy, bot_name(i)));
            let (_, out) = sim.room.join(&bot_name(i), &format!("token-{i}"), 0)?;
            sim.deliver(out);
        }
        Ok(sim)
    }

    pub fn room(&self) -> &RoomCore {
        &self.room
    }

    pub fn bots(&self) -> &[Bot] {
        &self.bots
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn frames(&self) -> &[Vec<ServerFrame>] {
        &self.frames
    }

    fn deliver(&mut self, out: Vec<Delivery>) {
        for d in out {
            let i = d.seat.index();
            if let Some(bot) = self.bots.get_mut(i) {
                bot.view.apply(&d.frame, self.now);
                self.frames[i].push(d.frame);
            }
        }
    }

    /// Sends a command on a bot's behalf, outside its policy. Returns the
    /// events that seat received in reply.
    pub fn inject(&mut self, seat: Seat, command: ClientCommand) -> Vec<ServerEvent> {
        let frame = self.bots[seat.index()].frame(command);
        let out = self.room.command(seat, &frame, self.now);
        let mine = out
            .iter()
            .filter(|d| d.seat == seat)
            .map(|d| d.frame.event.clone())
            .collect();
        self.deliver(out);
        mine
    }

    /// One bot action, or one jump of the clock when nobody can act.
    pub fn step(&mut self) -> Result<Progress, SimError> {
        if self.room.is_finished() {
            return Ok(Progress::Finished);
        }
        self.steps += 1;
        if self.steps > MAX_STEPS {
            return Err(SimError::TooManySteps(MAX_STEPS));
        }
        let mut wake: Option<u64> = None;
        for i in 0..self.bots.len() {
            match self.bots[i].decide(self.now) {
                Decision::Act(command) => {
                    let seat = Seat(i as u8);
                    let tag = command_tag(&command);
                    let frame = self.bots[i].frame(command);
                    let out = self.room.command(seat, &frame, self.now);
                    for d in out.iter().filter(|d| d.seat == seat) {
                        if let ServerEvent::Error { code, .. } | ServerEvent::ChatRejected { reason: code, .. } =
                            &d.frame.event
                        {
                            self.rejections.push(Rejection {
                                seat,
                                command: tag.to_string(),
                                code: code.clone(),
                            });
                        }
                    }
                    self.deliver(out);
                    return Ok(Progress::Acted(seat));
                }
                Decision::WaitUntil(t) => wake = Some(wake.map_or(t, |w| w.min(t))),
                Decision::Idle => {}
            }
        }
        let next = match (wake, self.room.next_deadline()) {
            (Some(a), Some(b)) => a.min(b),
            (a, b) => a.or(b).ok_or_else(|| SimError::Stuck {
                phase: self.room.game().map_or(miboard_core::TurnPhase::Lobby, |g| g.phase),
            })?,
        };
        self.now = self.now.max(next);
        let out = self.room.expire_due(self.now);
        self.deliver(out);
        Ok(Progress::Waited(self.now))
    }

    pub fn run(mut self) -> Result<Transcript, SimError> {
        while self.step()? != Progress::Finished {}
        self.finish()
    }

    /// Audits the log and packages the transcript.
    pub fn finish(self) -> Result<Transcript, SimError> {
        let log = self
            .room
            .log()
            .map(|l| l.parsed().clone())
            .ok_or(RoomError::NotStarted)?;
        let report = audit(&log, self.room.corpus().clone())?;
        Ok(Transcript {
            log,
            standings: report.standings,
            stats: report.stats,
            final_hash: report.final_hash,
            violations: report.violations,
            frames: self.frames,
            rejections: self.rejections,
            clock_ms: self.now,
        })
    }
}

pub fn command_tag(command: &ClientCommand) -> &'static str {
    let i = match command {
        ClientCommand::CreateRoom { .. } => 0,
        ClientCommand::JoinRoom { .. } => 1,
        ClientCommand::Ready => 2,
        ClientCommand::SubmitSelfExplanation { .. } => 3,
        ClientCommand::CastVote { .. } => 4,
        ClientCommand::Chat { .. } => 5,
        ClientCommand::Pass => 6,
        ClientCommand::Purchase { .. } => 7,
        ClientCommand::PlayCard { .. } => 8,
        ClientCommand::Leave => 9,
        ClientCommand::Typing => 10,
    };
    ClientCommand::TAGS[i]
}

/// Plays a whole game in process.
pub fn simulate_game(
    policies: &[BotPolicy],
    config: GameConfig,
    corpus: Arc<TextCorpus>,
    seed: u64,
) -> Result<Transcript, SimError> {
    Sim::new(policies, config, corpus, seed)?.run()
}
