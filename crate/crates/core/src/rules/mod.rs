//! MiBoard game rules as a pure, deterministic reducer.
//!
//! All randomness comes from the generator stored in [`GameState`]; the
//! reducer performs no I/O and reports what the host should do as
//! [`crate::effect::Effect`]s.

pub mod invariants;
mod reducer;
mod standings;
mod state;
mod tally;

pub use standings::{standings, Standing};
pub use state::{draw_strategy, CorpusCursor, GameState, PlayerState, RoundState, TurnPhase};
pub use tally::{needs_debate, tally_votes, VoteOutcome};
