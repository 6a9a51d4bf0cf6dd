//! Wire messages between clients and the server, their JSON codec, the
//! phase-legality rules, and per-recipient redacted snapshots.

pub mod codec;
pub mod messages;
pub mod validate;
pub mod view;

pub use codec::{ClientFrame, CodecError, Frame, ServerFrame};
pub use messages::{ClientCommand, ServerEvent};
pub use validate::validate_for_phase;
pub use view::RoomSnapshot;
