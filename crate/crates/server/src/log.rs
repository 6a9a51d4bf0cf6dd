//! Append-only JSON-lines event log: one header line, then one record per
//! accepted event. Each line is written with a single `write` call, so a
//! crash can at worst leave a truncated last line, which readers discard.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use miboard_core::{Action, Actor, GameConfig, GameEvent};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub v: u32,
    pub room_id: String,
    pub seed: u64,
    pub config: GameConfig,
    pub corpus_checksum: String,
    pub corpus_title: String,
    pub player_ids: Vec<String>,
    /// Canonical hash of the state produced by `new_game`.
    pub initial_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    /// Informational only; replay ignores it.
    pub wall_clock_ms: u64,
    pub actor: Actor,
    pub action: Action,
    /// Canonical hash of the state after this event.
    pub state_hash: String,
}

impl LogRecord {
    pub fn event(&self) -> GameEvent {
        GameEvent {
            actor: self.actor,
            action: self.action.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(LogHeader),
    Event(LogRecord),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log is empty")]
    Empty,
    #[error("line 1 is not a log header")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A log read back from text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
    /// A partial last line was discarded.
    pub truncated: bool,
}

impl ParsedLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = line(&Line::Header(self.header.clone()));
        for r in &self.records {
            out.push_str(&line(&Line::Event(r.clone())));
        }
        out
    }
}

fn line(l: &Line) -> String {
    let mut s = serde_json::to_string(l).expect("log lines serialize");
    s.push('\n');
    s
}

pub fn parse_log(text: &str) -> Result<ParsedLog, LogError> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    // A complete log ends with '\n', leaving an empty final piece.
    let tail = lines.pop().unwrap_or_default();
    let mut truncated = false;
    if !tail.trim().is_empty() {
        if serde_json::from_str::<Line>(tail).is_ok() {
            lines.push(tail);
        } else {
            truncated = true;
        }
    }
    let mut header = None;
    let mut records = Vec::new();
    for (i, raw) in lines.iter().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(raw).map_err(|e| LogError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        match (parsed, &header) {
            (Line::Header(h), None) => header = Some(h),
            (Line::Header(_), Some(_)) => {
                return Err(LogError::Malformed {
                    line: i + 1,
                    message: "second header".into(),
                })
            }
            (Line::Event(_), None) => return Err(LogError::MissingHeader),
            (Line::Event(r), Some(_)) => records.push(r),
        }
    }
    match header {
        Some(header) => Ok(ParsedLog {
            header,
            records,
            truncated,
        }),
        None if truncated => Err(LogError::MissingHeader),
        None => Err(LogError::Empty),
    }
}

pub fn read_log(path: &Path) -> Result<ParsedLog, LogError> {
    parse_log(&fs::read_to_string(path)?)
}

/// The live log of one game: kept in memory and, when a path is given,
/// mirrored to disk line by line.
#[derive(Debug)]
pub struct EventLog {
    log: ParsedLog,
    sink: Option<(PathBuf, File)>,
}

impl EventLog {
    /// Starts a fresh log, writing the header before anything else.
    pub fn create(header: LogHeader, path: Option<&Path>) -> io::Result<Self> {
        let log = ParsedLog {
            header,
            records: Vec::new(),
            truncated: false,
        };
        let sink = match path {
            Some(p) => Some((p.to_path_buf(), write_atomically(p, &log.to_jsonl())?)),
            None => None,
        };
        Ok(EventLog { log, sink })
    }

    /// Continues a recovered log. The file is rewritten first so a
    /// truncated tail does not corrupt the next append.
    pub fn resume(mut log: ParsedLog, path: Option<&Path>) -> io::Result<Self> {
        log.truncated = false;
        let sink = match path {
            Some(p) => Some((p.to_path_buf(), write_atomically(p, &log.to_jsonl())?)),
            None => None,
        };
        Ok(EventLog { log, sink })
    }

    pub fn header(&self) -> &LogHeader {
        &self.log.header
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.log.records
    }

    pub fn next_seq(&self) -> u64 {
        self.log.records.last().map_or(1, |r| r.seq + 1)
    }

    pub fn path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|(p, _)| p.as_path())
    }

    /// Durably appends `record`; on error the in-memory log is unchanged.
    pub fn append(&mut self, record: LogRecord) -> io::Result<()> {
        if let Some((_, file)) = &mut self.sink {
            file.write_all(line(&Line::Event(record.clone())).as_bytes())?;
            file.flush()?;
        }
        self.log.records.push(record);
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        self.log.to_jsonl()
    }

    pub fn parsed(&self) -> &ParsedLog {
        &self.log
    }
}

fn write_atomically(path: &Path, contents: &str) -> io::Result<File> {
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    OpenOptions::new().append(true).open(path)
}
