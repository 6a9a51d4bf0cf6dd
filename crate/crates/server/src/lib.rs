//! MiBoard server: rooms, the write-ahead event log, replay, and the
//! HTTP/WebSocket front end.

pub mod corpora;
pub mod log;
pub mod net;
pub mod replay;
pub mod room;

pub use corpora::Corpora;
pub use log::{parse_log, read_log, EventLog, LogHeader, LogRecord, ParsedLog};
pub use net::{AppState, ServerConfig};
pub use replay::{audit, replay, replay_with, AuditReport, GameStats, ReplayError};
pub use room::{Delivery, RoomCore, RoomError, RoomOptions};
