//! Point-to-point transport between computing peers.

use std::time::Duration;

use thiserror::Error;

mod frame;
mod mac;
mod memory;
mod shaping;
mod tcp;

pub use frame::{read_frame_bytes, Frame, MessageKind, HEADER_BYTES, LENGTH_BYTES, MAX_FRAME_BYTES};
pub use mac::MacKey;
pub use memory::{memory_mesh, MemoryTransport};
pub use shaping::{ClockMode, LinkShaper, NetProfile, PeerClock};
pub use tcp::{connect_mesh, dial, TcpTransport};

/// Computing peers are numbered `1..=n`; `0` is reserved for input peers.
pub type PeerId = u8;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("peer {0} disconnected")]
    Disconnected(PeerId),
    #[error("no link to peer {0}")]
    NoLink(PeerId),
    #[error("message authentication failed on link from peer {0}")]
    BadMac(PeerId),
    #[error("protocol desync: expected {expected}, got {got}")]
    Desync { expected: String, got: String },
}

/// Moves encoded frames between this peer and the others.
///
/// Frames on one link are delivered in order. `recv` blocks until a frame
/// from the given peer is available.
pub trait Transport: Send {
    fn me(&self) -> PeerId;
    fn send(&mut self, to: PeerId, frame: Vec<u8>) -> Result<(), NetError>;
    fn recv(&mut self, from: PeerId) -> Result<Vec<u8>, NetError>;
    /// Time elapsed on this transport's timeline.
    fn elapsed(&mut self) -> Duration;
    /// Restarts the timeline (start of a measurement window).
    fn restart_clock(&mut self);
    fn label(&self) -> &'static str;
}
