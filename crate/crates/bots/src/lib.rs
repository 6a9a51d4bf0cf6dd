//! Scripted MiBoard players, an in-process game simulator, and a harness
//! that plays the same bots against a live server.

pub mod check;
pub mod policy;
pub mod sim;
pub mod socket;
pub mod view;

pub use policy::{decide, Bot, BotPolicy, Decision};
pub use sim::{simulate_game, Sim, SimError, Transcript};
pub use socket::{play_over_socket, SocketError, SocketOptions, SocketRun};
pub use view::ClientView;
