//! Arena service: human-vs-agent sessions over JSON frames, the websocket
//! server, and the `skyjo` command line.

pub mod checkpoints;
pub mod cli;
pub mod hub;
pub mod protocol;
pub mod server;
pub mod session;
pub mod terminal;

pub use checkpoints::{CheckpointError, CheckpointStore, CHECKPOINT_DIR_ENV};
pub use hub::Hub;
pub use protocol::{ClientMessage, CreateRequest, Frame, ServerMessage};
pub use session::{Session, SessionError};
