//! Rules engine, corpus loader and wire protocol for MiBoard, an online
//! multiplayer game for practising self-explanation reading strategies.

pub mod canonical;
pub mod config;
pub mod corpus;
pub mod effect;
pub mod error;
pub mod event;
pub mod protocol;
pub mod rng;
pub mod rules;
pub mod strategy;

pub use config::{CardKind, EventCard, GameConfig};
pub use corpus::{load_corpus, TextCorpus};
pub use effect::Effect;
pub use error::{RuleError, SetupError};
pub use event::{Action, Actor, GameEvent, PurchaseKind, Seat, TimerKind};
pub use rules::{GameState, TurnPhase};
pub use strategy::Strategy;
