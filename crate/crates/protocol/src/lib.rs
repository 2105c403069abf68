//! WebSocket protocol between a live authoring session and operator tools.

pub mod envelope;
pub mod outbox;
pub mod server;
pub mod transport;

pub use envelope::{Envelope, ProtocolError};
pub use outbox::Outbox;
pub use server::{ClientId, LoggedFrame, Message, Rates, ServerCore, Target};
pub use transport::{serve, ServeOptions, DEFAULT_PORT, PORT_ENV};
