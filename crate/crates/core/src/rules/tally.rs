use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::Seat;
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub matched_count: usize,
    pub eligible_count: usize,
    pub majority_matched: bool,
}

/// Counts votes against the assigned strategy. `votes` is keyed by every
/// non-reader seat; `None` is an abstention and counts as a non-match.
/// A majority is strict: more than half of the eligible seats.
pub fn tally_votes(votes: &BTreeMap<Seat, Option<Strategy>>, assigned: Strategy) -> VoteOutcome {
    let matched_count = votes.values().filter(|v| **v == Some(assigned)).count();
    let eligible_count = votes.len();
    VoteOutcome {
        matched_count,
        eligible_count,
        majority_matched: 2 * matched_count > eligible_count,
    }
}

/// True unless every eligible seat voted for the assigned strategy.
pub fn needs_debate(votes: &BTreeMap<Seat, Option<Strategy>>, assigned: Strategy) -> bool {
    votes.values().any(|v| *v != Some(assigned))
}
