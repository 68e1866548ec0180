//! Live simulation sessions over a WebSocket: a client starts a trial,
//! steers the virtual wearer, and receives poses, haptic cues and scene
//! updates every tick.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Envelope, ErrorCode, PerceptionMode, ServerMessage};
pub use server::{Gateway, GatewayConfig, GatewayError};
pub use session::{Session, SessionConfig, SessionRecord};
