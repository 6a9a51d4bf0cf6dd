use serde::{Deserialize, Serialize};

use crate::event::{Seat, TimerKind};
use crate::protocol::ServerEvent;
use crate::rules::Standing;

/// Something the host must do after a reduction. The reducer performs no
/// I/O; it only describes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    Broadcast { event: ServerEvent },
    SendTo { seat: Seat, event: ServerEvent },
    ArmTimer { timer: TimerKind, seconds: u32 },
    CancelTimer { timer: TimerKind },
    GameEnded { standings: Vec<Standing> },
}

impl Effect {
    /// The event `seat` would receive from this effect, if any.
    pub fn event_for(&self, seat: Seat) -> Option<&ServerEvent> {
        match self {
            Effect::Broadcast { event } => Some(event),
            Effect::SendTo { seat: to, event } if *to == seat => Some(event),
            _ => None,
        }
    }
}
